"""Weighted eigenvalue problems and the spectral splittings they induce.

The discrete problem is the generalized symmetric pencil L z = lambda M_A z
where L is the block Laplacian acting on stacked planar fields and M_A the
pointwise multiplication by a symmetric positive definite matrix field.
Eigenvalues are positive; grouping nearly equal values into distinct
eigenvalues with their multiplicities gives the cumulative dimension
counts that drive the multiplicity theorems, and partitioning eigenspaces
at a resonance index gives the splitting the saddle point reduction acts
on.

Eigenvectors are normalized in the discrete H^1_0 inner product, in which
distinct-eigenvalue blocks are automatically orthogonal.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .fields import MatrixField, assert_spd_on_grid, scaled_field
from .grid import GridDomain, laplacian

DEFAULT_CLUSTERING_TOL = 1e-6
DEFAULT_RESIDUAL_TOL = 1e-8

A_MINUS_CASE = "A_minus_case"
A_PLUS_CASE = "A_plus_case"


@dataclass(frozen=True)
class Spectrum:
    """Clustered generalized eigenpairs of (L, M_A).

    Attributes:
        distinct_eigenvalues: ascending, positive, one per cluster.
        eigenspaces: per cluster, (2N, mult) H^1_0-orthonormal columns.
        multiplicities: per cluster, its dimension.
        clustering_tol: relative tolerance used to merge raw eigenvalues.
        cluster_gaps: per adjacent cluster pair, the relative gap; small
            gaps flag physically near-degenerate spectra for inspection.
        residuals: per raw pair, relative eigenpair residual.
        n_space: full discrete dimension 2N.
    """

    distinct_eigenvalues: np.ndarray
    eigenspaces: list = field(repr=False)
    multiplicities: np.ndarray
    clustering_tol: float
    cluster_gaps: np.ndarray
    residuals: np.ndarray = field(repr=False)
    n_space: int = 0

    @property
    def n_distinct(self) -> int:
        return len(self.distinct_eigenvalues)

    @property
    def n_pairs(self) -> int:
        return int(self.multiplicities.sum())


@dataclass(frozen=True)
class SpectralSplit:
    """H^1_0-orthogonal splitting of the discrete space at a cut index.

    In the A_minus_case the finite side X^+ collects the eigenspaces with
    distinct index below the cut and mu is its dimension; the dual case
    puts indices up to the cut on the minus side.
    """

    minus_basis: np.ndarray = field(repr=False)
    plus_basis: np.ndarray = field(repr=False)
    mu: int = 0
    side: str = A_MINUS_CASE
    k: int = 1


def mass_matrix(g: GridDomain, a: MatrixField) -> np.ndarray:
    """Dense weighted mass operator: pointwise multiplication by A(x)."""
    n = g.n_nodes
    mats = a(g.nodes)
    m = np.zeros((2 * n, 2 * n))
    idx = np.arange(n)
    m[idx, idx] = mats[:, 0, 0]
    m[idx, n + idx] = mats[:, 0, 1]
    m[n + idx, idx] = mats[:, 1, 0]
    m[n + idx, n + idx] = mats[:, 1, 1]
    return m


def block_laplacian_dense(g: GridDomain) -> np.ndarray:
    lap = laplacian(g).toarray()
    n = g.n_nodes
    out = np.zeros((2 * n, 2 * n))
    out[:n, :n] = lap
    out[n:, n:] = lap
    return out


def solve_weighted_eigenproblem(
    g: GridDomain,
    a: MatrixField,
    count: int,
    clustering_tol: float = DEFAULT_CLUSTERING_TOL,
    residual_tol: float = DEFAULT_RESIDUAL_TOL,
) -> Spectrum:
    """First ``count`` eigenpairs of L z = lambda M_A z, clustered.

    Args:
        g: the grid.
        a: weight field, must be symmetric positive definite at all nodes.
        count: number of raw pairs to return, at most 2N.
        clustering_tol: relative gap under which adjacent raw eigenvalues
            join one distinct eigenvalue.
        residual_tol: relative eigenpair residual bound; violation raises.

    Raises:
        ValueError: weight not SPD at a node, or count out of range.
        RuntimeError: eigenpair residual exceeds residual_tol.
    """
    assert_spd_on_grid(a, g)
    n2 = 2 * g.n_nodes
    if not 1 <= count <= n2:
        raise ValueError(f"count must lie in [1, {n2}], got {count}")
    lb = block_laplacian_dense(g)
    mb = mass_matrix(g, a)
    lam, vec = scipy.linalg.eigh(lb, mb, subset_by_index=[0, count - 1])

    # relative residuals of the raw pairs
    lv = lb @ vec
    mv = mb @ vec
    res = np.linalg.norm(lv - lam * mv, axis=0) / np.linalg.norm(lv, axis=0)
    worst = float(res.max())
    if worst > residual_tol:
        raise RuntimeError(
            f"eigenpair residual {worst:.3e} exceeds tolerance {residual_tol:.1e}"
        )
    if lam[0] <= 0:
        raise RuntimeError(f"nonpositive eigenvalue {lam[0]} from SPD pencil")

    # H^1_0 normalization: columns are M-orthonormal, so z^T L z = lambda
    vec = vec / np.sqrt(g.quad_weight * lam)

    # cluster adjacent eigenvalues by relative gap
    breaks = np.flatnonzero(np.diff(lam) > clustering_tol * lam[:-1])
    starts = np.concatenate([[0], breaks + 1])
    ends = np.concatenate([breaks + 1, [len(lam)]])
    distinct = np.array([lam[s:e].mean() for s, e in zip(starts, ends)])
    spaces = [vec[:, s:e] for s, e in zip(starts, ends)]
    mults = np.array([e - s for s, e in zip(starts, ends)], dtype=int)
    gaps = (
        np.diff(distinct) / distinct[:-1] if len(distinct) > 1 else np.empty(0)
    )
    return Spectrum(
        distinct_eigenvalues=distinct,
        eigenspaces=spaces,
        multiplicities=mults,
        clustering_tol=clustering_tol,
        cluster_gaps=gaps,
        residuals=res,
        n_space=n2,
    )


def cumulative_dims(s: Spectrum, n: int) -> int:
    """Sum of the first n multiplicities (the d_n count)."""
    if not 0 <= n <= s.n_distinct:
        raise ValueError(f"n must lie in [0, {s.n_distinct}], got {n}")
    return int(s.multiplicities[:n].sum())


def resonant_index(s: Spectrum, rel_tol: float = 1e-8) -> int | None:
    """1-based distinct index whose eigenvalue equals 1, or None."""
    close = np.flatnonzero(
        np.abs(s.distinct_eigenvalues - 1.0) <= rel_tol * np.maximum(s.distinct_eigenvalues, 1.0)
    )
    return int(close[0]) + 1 if close.size else None


def normalize_resonance(
    a: MatrixField, k: int, g: GridDomain, clustering_tol: float = DEFAULT_CLUSTERING_TOL
) -> MatrixField:
    """Rescale the field so its k-th distinct eigenvalue equals 1.

    By homogeneity of the pencil, lambda_j(c A) = lambda_j(A) / c, so
    scaling by lambda_k(A) moves the k-th distinct eigenvalue to 1 and
    leaves multiplicities and eigenvectors unchanged.
    """
    if k < 1:
        raise ValueError(f"resonance index must be >= 1, got {k}")
    n2 = 2 * g.n_nodes
    count = min(n2, max(4 * k, 8))
    while True:
        s = solve_weighted_eigenproblem(g, a, count, clustering_tol)
        if s.n_distinct >= k:
            break
        if count == n2:
            raise ValueError(
                f"spectrum has only {s.n_distinct} distinct eigenvalues, need {k}"
            )
        count = min(n2, 2 * count)
    lam_k = float(s.distinct_eigenvalues[k - 1])
    return scaled_field(a, lam_k)


def build_split(s: Spectrum, k: int, side: str = A_MINUS_CASE) -> SpectralSplit:
    """Partition the eigenspaces at distinct index k.

    A_minus_case: the finite side X^+ spans indices 1..k-1 (mu = d_{k-1},
    possibly 0 when k = 1) and X^- the rest.  A_plus_case: the finite
    side is X^- spanning indices 1..k, and X^+ the rest.

    The spectrum must be complete (all 2N pairs) so the two blocks span
    the discrete space.
    """
    if side not in (A_MINUS_CASE, A_PLUS_CASE):
        raise ValueError(f"unknown split side {side!r}")
    if not 1 <= k <= s.n_distinct:
        raise ValueError(f"cut index {k} outside [1, {s.n_distinct}]")
    if s.n_pairs != s.n_space:
        raise ValueError(
            f"split needs the complete spectrum: {s.n_pairs} of {s.n_space} pairs"
        )
    cut = k - 1 if side == A_MINUS_CASE else k
    low = (
        np.hstack(s.eigenspaces[:cut])
        if cut > 0
        else np.empty((s.n_space, 0))
    )
    high = (
        np.hstack(s.eigenspaces[cut:])
        if cut < s.n_distinct
        else np.empty((s.n_space, 0))
    )
    if side == A_MINUS_CASE:
        plus, minus = low, high
    else:
        minus, plus = low, high
    return SpectralSplit(
        minus_basis=minus, plus_basis=plus, mu=plus.shape[1], side=side, k=k
    )


def spectrum_to_csv(s: Spectrum, path) -> None:
    """Write (index, eigenvalue, multiplicity, d_n) rows for plotting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "eigenvalue", "multiplicity", "d_n"])
        running = 0
        for i, (lam, mult) in enumerate(
            zip(s.distinct_eigenvalues, s.multiplicities), start=1
        ):
            running += int(mult)
            writer.writerow([i, f"{lam:.16e}", int(mult), running])
