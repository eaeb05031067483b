"""Multi-start critical point search on the reduced functional.

Minimization runs on phi over the X^- coefficients, warm L-BFGS first,
then a damped Newton polish on the reduced gradient.  Every accepted
record is re-checked for criticality in the full space through the
plain residual, independent of the reduction machinery, and the trivial
solution is always reported as its own record.

The searcher makes no completeness claim: the underlying multiplicity
theorems assert existence of at least two nontrivial solutions under
their arithmetic hypotheses, and the report simply lists everything the
starts converged to.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.optimize

from .functional import phi_value, residual_norm
from .problem import CheckReport, NonlinearityModel
from .reduction import (
    ModelReduction,
    ReductionHandle,
    _minimize_smooth,
    full_point,
    reduced_value_and_gradient,
    solve_psi,
)
from .spectral import (
    A_MINUS_CASE,
    A_PLUS_CASE,
    Spectrum,
    cumulative_dims,
    resonant_index,
)

SCHEMA_VERSION = 1
SEPARATION_THRESHOLD = 1e-3
TRIVIALITY_THRESHOLD = 1e-6
INDEX_TOL = 1e-4


@dataclass(frozen=True)
class SearchStrategy:
    n_starts: int = 200
    radii: tuple = (0.1, 1.0, 10.0)
    deflation: bool = True
    newton_refine: bool = True
    seed: int = 0
    residual_tol: float = 1e-8
    separation: float = SEPARATION_THRESHOLD
    triviality: float = TRIVIALITY_THRESHOLD
    lbfgs_maxiter: int = 300


@dataclass(frozen=True)
class CriticalPointRecord:
    point: np.ndarray
    reduced_point: np.ndarray
    value: float
    residual: float
    morse_index_reduced: int
    trivial: bool
    basin_seed: str

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.reduced_point))


@dataclass
class SearchResult:
    records: list
    diagnostics: dict

    def nontrivial(self) -> list:
        return [rec for rec in self.records if not rec.trivial]


@dataclass(frozen=True)
class SyntheticHandle:
    """Search space given directly by callables; full space = reduced space."""

    value: Callable
    gradient: Callable
    dim: int


# ---------------------------------------------------------------------------
# adapter layer: one search core over three kinds of handle


class _Space:
    def __init__(self, dim, value_and_grad, embed, full_residual):
        self.dim = dim
        self.value_and_grad = value_and_grad
        self.embed = embed  # v -> full-space point
        self.full_residual = full_residual  # full point -> independent residual


def _make_space(r) -> _Space:
    if isinstance(r, ReductionHandle):
        def embed(v):
            return full_point(r, v, solve_psi(r, v))

        return _Space(
            dim=r.n_minus,
            value_and_grad=lambda v: reduced_value_and_gradient(r, v),
            embed=embed,
            full_residual=lambda z: residual_norm(r.functional, z),
        )
    if isinstance(r, ModelReduction):
        def vag(v):
            z = r.lift(v, r.solve_psi(v))
            return float(r.value(z)), r.gradient(z)[: r.n_minus]

        return _Space(
            dim=r.n_minus,
            value_and_grad=vag,
            embed=lambda v: r.lift(v, r.solve_psi(v)),
            full_residual=lambda z: float(np.linalg.norm(r.gradient(z))),
        )
    if isinstance(r, SyntheticHandle):
        return _Space(
            dim=r.dim,
            value_and_grad=lambda v: (float(r.value(v)), np.asarray(r.gradient(v))),
            embed=lambda v: np.asarray(v, dtype=float),
            full_residual=lambda z: float(np.linalg.norm(r.gradient(z))),
        )
    raise TypeError(f"no search adapter for {type(r).__name__}")


# ---------------------------------------------------------------------------
# starts


def _start_points(space: _Space, strategy: SearchStrategy, rng) -> list:
    starts = []
    n_dirs = min(space.dim, 10)
    for i in range(n_dirs):
        for rad in strategy.radii:
            for sgn in (1.0, -1.0):
                v = np.zeros(space.dim)
                v[i] = sgn * rad
                starts.append((v, f"eigen:{'+' if sgn > 0 else '-'}{i}:r={rad:g}"))
                if len(starts) >= strategy.n_starts:
                    return starts
    i = 0
    while len(starts) < strategy.n_starts:
        d = rng.normal(size=space.dim)
        d /= max(np.linalg.norm(d), 1e-30)
        rad = strategy.radii[i % len(strategy.radii)] * rng.uniform(0.5, 2.0)
        starts.append((rad * d, f"random:{i}"))
        i += 1
    return starts


# ---------------------------------------------------------------------------
# search core


def find_critical_points(
    r,
    strategy: SearchStrategy = SearchStrategy(),
    deflate: list | None = None,
) -> SearchResult:
    """Multi-start search; assumes the monotonicity condition was verified
    and phi is bounded below (see verify_condition / coercivity_diagnostic).

    Records are deduplicated at strategy.separation in the reduced norm,
    sorted by (value, norm), and always include the trivial solution.
    With deflation on, candidates landing within the separation distance
    of a point in `deflate` are rejected rather than reported again.
    """
    space = _make_space(r)
    if isinstance(r, (ReductionHandle, ModelReduction)):
        r.psi_cache = None  # searches are pure functions of (handle, strategy)
    rng = np.random.default_rng(np.random.PCG64(strategy.seed))
    deflated = [np.asarray(d, dtype=float) for d in (deflate or [])]
    diagnostics = {
        "n_starts": 0,
        "converged": 0,
        "failed": 0,
        "duplicates": 0,
        "deflation_rejected": 0,
        "nonfinite": 0,
    }
    candidates = []

    def too_close(v, pool):
        return any(np.linalg.norm(v - p) <= strategy.separation for p in pool)

    for v0, label in _start_points(space, strategy, rng):
        diagnostics["n_starts"] += 1
        try:
            res = scipy.optimize.minimize(
                space.value_and_grad,
                v0,
                jac=True,
                method="L-BFGS-B",
                options={"maxiter": strategy.lbfgs_maxiter, "gtol": 1e-6},
            )
            v = res.x
            if not np.all(np.isfinite(v)):
                diagnostics["nonfinite"] += 1
                continue
            if strategy.newton_refine and space.dim <= 512:
                v, _, _ = _minimize_smooth(
                    lambda u: space.value_and_grad(u)[0],
                    lambda u: space.value_and_grad(u)[1],
                    v,
                    tol=0.5 * strategy.residual_tol,
                    max_iter=80,
                )
            else:
                if np.linalg.norm(space.value_and_grad(v)[1]) > strategy.residual_tol:
                    diagnostics["failed"] += 1
                    continue
        except RuntimeError:
            diagnostics["failed"] += 1
            continue
        if strategy.deflation and too_close(v, deflated):
            diagnostics["deflation_rejected"] += 1
            continue
        if too_close(v, [c[0] for c in candidates]):
            diagnostics["duplicates"] += 1
            continue
        candidates.append((v, label))
        diagnostics["converged"] += 1

    records = []
    origin = np.zeros(space.dim)
    have_trivial = False
    for v, label in candidates:
        z = space.embed(v)
        trivial = np.linalg.norm(v) <= strategy.triviality
        if trivial:
            v = origin.copy()
            z = space.embed(v)
            if have_trivial:
                continue
            have_trivial = True
            label = "origin"
        val, grad = space.value_and_grad(v)
        resid = space.full_residual(z)
        if resid > strategy.residual_tol:
            diagnostics["failed"] += 1
            continue
        idx, _ = morse_index(r, v)
        records.append(
            CriticalPointRecord(
                point=z,
                reduced_point=v,
                value=float(val),
                residual=float(resid),
                morse_index_reduced=idx,
                trivial=bool(trivial),
                basin_seed=label,
            )
        )
    if not have_trivial and not (strategy.deflation and too_close(origin, deflated)):
        z0 = space.embed(origin)
        val0, _ = space.value_and_grad(origin)
        idx0, _ = morse_index(r, origin)
        records.append(
            CriticalPointRecord(
                point=z0,
                reduced_point=origin,
                value=val0,
                residual=space.full_residual(z0),
                morse_index_reduced=idx0,
                trivial=True,
                basin_seed="origin",
            )
        )
    records.sort(key=lambda rec: (rec.value, rec.norm))
    return SearchResult(records=records, diagnostics=diagnostics)


# ---------------------------------------------------------------------------
# classification


def reduced_hessian(r, v: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Symmetrized finite-difference Hessian of phi at v."""
    space = _make_space(r)
    v = np.asarray(v, dtype=float)
    n = space.dim
    hess = np.empty((n, n))
    for j in range(n):
        h = step * max(1.0, abs(v[j]))
        vp, vm = v.copy(), v.copy()
        vp[j] += h
        vm[j] -= h
        hess[:, j] = (space.value_and_grad(vp)[1] - space.value_and_grad(vm)[1]) / (
            2 * h
        )
    return 0.5 * (hess + hess.T)


def morse_index(r, v: np.ndarray, index_tol: float = INDEX_TOL) -> tuple[int, int]:
    """(negative count, near-null count) of the reduced FD Hessian.

    index_tol is absolute on eigenvalues; the FD gradient noise limits
    how small a resolvable eigenvalue can be, so the default is coarse.
    A nonzero second entry flags degeneracy.
    """
    eigs = np.linalg.eigvalsh(reduced_hessian(r, v))
    index = int(np.sum(eigs < -index_tol))
    nullish = int(np.sum(np.abs(eigs) <= index_tol))
    return index, nullish


# ---------------------------------------------------------------------------
# local linking at the origin


def resonance_bases(s: Spectrum, m: int):
    """(V_minus, V_zero, V_plus) bases for the eigenvalue-1 splitting.

    m is the 1-based distinct index of the resonant cluster, or 0 when
    the origin linearization is nonresonant (V_zero empty, the low block
    collects everything below 1).
    """
    n_rows = s.eigenspaces[0].shape[0]

    def block(idx):
        mats = [s.eigenspaces[i] for i in idx]
        return np.hstack(mats) if mats else np.zeros((n_rows, 0))

    if m == 0:
        low = [i for i, lam in enumerate(s.distinct_eigenvalues) if lam < 1.0]
        high = [i for i, lam in enumerate(s.distinct_eigenvalues) if lam >= 1.0]
        return block(low), np.zeros((n_rows, 0)), block(high)
    if not 1 <= m <= s.n_distinct:
        raise ValueError(f"resonant index {m} outside 1..{s.n_distinct}")
    return (
        block(range(m - 1)),
        block([m - 1]),
        block(range(m, s.n_distinct)),
    )


def local_linking_check(
    h,
    bases,
    origin_side: str,
    rho_schedule: tuple = (1e-1, 1e-2, 1e-3),
    rng: np.random.Generator | None = None,
    n_directions: int = 32,
) -> CheckReport:
    """Sample the two sign conditions of the origin linking geometry.

    origin_side "plus" groups the kernel with the low block (Phi <= 0 on
    V_minus + V_zero, Phi > 0 on V_plus); "minus" groups it with the
    high block.  holds reports the largest schedule radius at which both
    sampled conditions pass.
    """
    if origin_side not in ("plus", "minus"):
        raise ValueError(f"origin_side must be plus or minus, got {origin_side!r}")
    v_minus, v_zero, v_plus = bases
    if origin_side == "plus":
        lower_blocks = [v_minus, v_zero]
        upper_blocks = [v_plus]
    else:
        lower_blocks = [v_minus]
        upper_blocks = [v_zero, v_plus]
    rng = rng if rng is not None else np.random.default_rng(0)

    def sphere_sample(blocks, rho):
        # each constituent block alone, then the mixture: violations
        # concentrate near the kernel directions and pure random draws
        # from the concatenation would dilute them away
        blocks = [b for b in blocks if b.shape[1] > 0]
        if not blocks:
            return
        for basis in blocks + ([np.hstack(blocks)] if len(blocks) > 1 else []):
            for _ in range(n_directions):
                c = rng.normal(size=basis.shape[1])
                c *= rho / max(np.linalg.norm(c), 1e-30)
                yield basis @ c

    best_rho = None
    witness = None
    for rho in sorted(rho_schedule, reverse=True):
        ok = True
        for frac in (1.0, 0.5, 0.1):
            for z in sphere_sample(lower_blocks, frac * rho):
                if phi_value(h, z) > 1e-12:
                    ok = False
                    witness = {"side": "lower", "rho": frac * rho}
                    break
            if not ok:
                break
            for z in sphere_sample(upper_blocks, frac * rho):
                if phi_value(h, z) <= 0.0:
                    ok = False
                    witness = {"side": "upper", "rho": frac * rho}
                    break
            if not ok:
                break
        if ok:
            best_rho = rho
            break
    return CheckReport(
        name="local_linking",
        holds=best_rho is not None,
        worst=best_rho if best_rho is not None else 0.0,
        witness=witness,
        details={
            "origin_side": origin_side,
            "rho": best_rho,
            "dim_lower": int(sum(b.shape[1] for b in lower_blocks)),
            "dim_upper": int(sum(b.shape[1] for b in upper_blocks)),
        },
    )


# ---------------------------------------------------------------------------
# multiplicity prediction


def evaluate_prediction(
    d_m0: int,
    d_m_minus_1_0: int,
    d_inf: int,
    side: str,
    origin_sign: str,
) -> dict:
    """The arithmetic core of the two-solutions theorems.

    Case (i) applies when the origin perturbation sits above its
    linearization (origin_sign plus) and compares d_m0 against the
    infinity count; case (ii) applies below and compares d_{m-1}0.
    No solving happens here.
    """
    if origin_sign not in ("plus", "minus"):
        raise ValueError(
            f"prediction needs an origin sign hypothesis, got {origin_sign!r}"
        )
    case = "i" if origin_sign == "plus" else "ii"
    d_origin = d_m0 if case == "i" else d_m_minus_1_0
    return {
        "expected_nontrivial": bool(d_origin != d_inf),
        "case": case,
        "side": side,
        "d_m0": int(d_m0),
        "d_m_minus_1_0": int(d_m_minus_1_0),
        "d_inf": int(d_inf),
        "d_origin_used": int(d_origin),
    }


def predict_multiplicity(
    model: NonlinearityModel,
    s_zero: Spectrum,
    s_inf: Spectrum,
) -> dict:
    """Evaluate the relevant multiplicity inequality for a model.

    d counts come from the two pencils: at the origin, through and
    strictly below the resonant cluster; at infinity, strictly below it
    for the concave-fiber orientation (that count equals mu) and through
    it for the dual orientation.
    """
    k = resonant_index(s_inf)
    if k is None:
        raise ValueError("infinity pencil has no eigenvalue at 1; k undefined")
    m = resonant_index(s_zero)
    if m is None:
        below = sum(
            mult
            for lam, mult in zip(s_zero.distinct_eigenvalues, s_zero.multiplicities)
            if lam < 1.0
        )
        d_m0 = d_m_minus_1_0 = below
    else:
        d_m0 = cumulative_dims(s_zero, m)
        d_m_minus_1_0 = cumulative_dims(s_zero, m - 1)
    side = A_MINUS_CASE if model.infinity_sign == "minus" else A_PLUS_CASE
    d_inf = cumulative_dims(s_inf, k - 1) if side == A_MINUS_CASE else cumulative_dims(
        s_inf, k
    )
    report = evaluate_prediction(d_m0, d_m_minus_1_0, d_inf, side, model.origin_sign)
    report["k"] = int(k)
    report["m"] = int(m or 0)
    report["mu"] = int(cumulative_dims(s_inf, k - 1))
    return report


# ---------------------------------------------------------------------------
# persistence


def records_to_json(result: SearchResult, path) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "diagnostics": result.diagnostics,
        "records": [
            {
                "point": rec.point.tolist(),
                "reduced_point": rec.reduced_point.tolist(),
                "value": rec.value,
                "residual": rec.residual,
                "morse_index_reduced": rec.morse_index_reduced,
                "trivial": rec.trivial,
                "basin_seed": rec.basin_seed,
            }
            for rec in result.records
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)


def records_to_csv(result: SearchResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "residual", "norm", "index", "trivial"])
        for rec in result.records:
            writer.writerow(
                [
                    f"{rec.value:.12e}",
                    f"{rec.residual:.3e}",
                    f"{rec.norm:.12e}",
                    rec.morse_index_reduced,
                    rec.trivial,
                ]
            )
