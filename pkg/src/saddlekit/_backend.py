"""GF(2) rank kernels with optional numba acceleration.

Boundary-matrix rank over the two-element field is the hot loop of the
homology computations.  Columns are bitpacked into uint64 words and
reduced with the standard lowest-one (here: highest set row) pivoting
scheme.  Two interchangeable implementations exist:

* a numba ``@njit`` kernel, used when numba imports and the environment
  allows it;
* a pure numpy fallback with the same semantics.

Selection: the ``SADDLEKIT_BACKEND`` environment variable, read at import
time.  ``numba`` forces the jit kernel (raises if numba is missing),
``numpy`` forces the fallback, anything else (or unset) means "numba if
available".  ``benchmarks/bench_gf2.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba as nb

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    nb = None
    HAS_NUMBA = False

_ENV_FLAG = "SADDLEKIT_BACKEND"


def _requested_backend() -> str:
    choice = os.getenv(_ENV_FLAG, "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"{_ENV_FLAG} must be auto, numba, or numpy, got {choice!r}")
    if choice == "numba" and not HAS_NUMBA:
        raise ImportError(f"{_ENV_FLAG}=numba but numba is not importable")
    if choice == "auto":
        return "numba" if HAS_NUMBA else "numpy"
    return choice


BACKEND = _requested_backend()


def pack_columns(entries: list[np.ndarray], n_rows: int) -> np.ndarray:
    """Bitpack sparse columns into a (n_cols, n_words) uint64 array.

    Args:
        entries: per column, an integer array of row indices with a 1.
        n_rows: number of rows of the represented matrix.

    Returns:
        Packed matrix; bit r of word w of column j encodes row 64*w + r.
    """
    n_words = max(1, (n_rows + 63) // 64)
    packed = np.zeros((len(entries), n_words), dtype=np.uint64)
    for j, rows in enumerate(entries):
        rows = np.asarray(rows, dtype=np.int64)
        if rows.size == 0:
            continue
        if rows.min() < 0 or rows.max() >= n_rows:
            raise ValueError(f"column {j} has row indices outside [0, {n_rows})")
        np.bitwise_or.at(
            packed[j], rows // 64, np.uint64(1) << (rows % 64).astype(np.uint64)
        )
    return packed


def pack_dense(mat: np.ndarray) -> np.ndarray:
    """Bitpack a dense 0/1 matrix, columns as bitset rows of the result."""
    mat = np.asarray(mat, dtype=np.uint64) & np.uint64(1)
    n_rows, n_cols = mat.shape
    cols = [np.flatnonzero(mat[:, j]) for j in range(n_cols)]
    return pack_columns(cols, n_rows)


def _gf2_rank_numpy(cols: np.ndarray) -> int:
    """Column reduction over GF(2), numpy word operations per step."""
    cols = cols.copy()
    n_cols = cols.shape[0]
    owner = {}
    rank = 0
    for j in range(n_cols):
        col = cols[j]
        while True:
            nz = np.flatnonzero(col)
            if nz.size == 0:
                break
            w = int(nz[-1])
            low = 64 * w + int(col[w]).bit_length() - 1
            pivot = owner.get(low)
            if pivot is None:
                owner[low] = j
                rank += 1
                break
            np.bitwise_xor(col, cols[pivot], out=col)
    return rank


if HAS_NUMBA:

    @nb.njit(cache=True)
    def _gf2_rank_numba(cols):  # pragma: no cover - compiled
        cols = cols.copy()
        n_cols, n_words = cols.shape
        owner = np.full(n_words * 64, -1, dtype=np.int64)
        rank = 0
        for j in range(n_cols):
            while True:
                low = -1
                for w in range(n_words - 1, -1, -1):
                    word = cols[j, w]
                    if word != np.uint64(0):
                        b = 63
                        while (word >> np.uint64(b)) & np.uint64(1) == np.uint64(0):
                            b -= 1
                        low = 64 * w + b
                        break
                if low < 0:
                    break
                pivot = owner[low]
                if pivot < 0:
                    owner[low] = j
                    rank += 1
                    break
                for w in range(n_words):
                    cols[j, w] ^= cols[pivot, w]
        return rank


def gf2_rank(cols: np.ndarray) -> int:
    """Rank over GF(2) of a bitpacked column matrix.

    The input is never modified.  Dispatches to the backend selected at
    import time.
    """
    if cols.size == 0 or cols.shape[0] == 0:
        return 0
    cols = np.ascontiguousarray(cols, dtype=np.uint64)
    if BACKEND == "numba":
        return int(_gf2_rank_numba(cols))
    return _gf2_rank_numpy(cols)


def gf2_rank_dense(mat: np.ndarray) -> int:
    """Rank over GF(2) of a dense 0/1 matrix (convenience wrapper)."""
    if mat.size == 0:
        return 0
    return gf2_rank(pack_dense(mat))
