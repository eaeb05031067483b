"""Compare the GF(2) rank backends on boundary-like random matrices.

The homology engine spends its time ranking bitpacked boundary matrices
whose columns carry a handful of ones (a cubical q-cell has 2q faces).
This script times the numba kernel against the pure numpy fallback on
synthetic instances of that shape and cross-checks that they agree.

    python3 benchmarks/bench_gf2.py
    python3 benchmarks/bench_gf2.py --sizes 500,1000,4000 --repeats 5

The runtime selection knob is the SADDLEKIT_BACKEND environment variable
(auto | numba | numpy); this benchmark bypasses it and calls both
implementations directly.
"""

import argparse
import time

import numpy as np

from saddlekit._backend import (
    BACKEND,
    HAS_NUMBA,
    _gf2_rank_numpy,
    gf2_rank,
    pack_columns,
)

if HAS_NUMBA:
    from saddlekit._backend import _gf2_rank_numba


def boundary_like(rng, n_cols, n_rows, ones_per_col):
    cols = [
        rng.choice(n_rows, size=min(ones_per_col, n_rows), replace=False)
        for _ in range(n_cols)
    ]
    return pack_columns(cols, n_rows)


def best_time(fn, arg, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(arg)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--sizes",
        default="200,500,1000,2000,4000",
        help="comma-separated column counts (rows = 1.2x columns)",
    )
    parser.add_argument("--ones", type=int, default=6, help="ones per column")
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    rng = np.random.default_rng(args.seed)

    print(f"selected backend: {BACKEND} (numba available: {HAS_NUMBA})")
    header = f"{'n_cols':>8} {'n_rows':>8} {'rank':>8} {'numpy ms':>10}"
    if HAS_NUMBA:
        header += f" {'numba ms':>10} {'speedup':>8}"
    print(header)

    if HAS_NUMBA:
        # compile outside the timed region
        _gf2_rank_numba(boundary_like(rng, 8, 16, 3))

    for n_cols in sizes:
        n_rows = int(1.2 * n_cols)
        packed = boundary_like(rng, n_cols, n_rows, args.ones)
        rank_np = _gf2_rank_numpy(packed)
        t_np = best_time(_gf2_rank_numpy, packed, args.repeats)
        line = f"{n_cols:>8} {n_rows:>8} {rank_np:>8} {1e3 * t_np:>10.2f}"
        if HAS_NUMBA:
            rank_nb = int(_gf2_rank_numba(packed))
            if rank_nb != rank_np:
                raise AssertionError(
                    f"backend disagreement at n_cols={n_cols}: "
                    f"numpy {rank_np} vs numba {rank_nb}"
                )
            t_nb = best_time(_gf2_rank_numba, packed, args.repeats)
            line += f" {1e3 * t_nb:>10.2f} {t_np / t_nb:>8.1f}x"
        if gf2_rank(packed) != rank_np:
            raise AssertionError("dispatching wrapper disagrees with backends")
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
