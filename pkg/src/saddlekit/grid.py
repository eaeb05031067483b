"""Finite difference grids on rectangles with homogeneous Dirichlet data.

A grid holds the interior nodes of a tensor product discretization of an
interval or a rectangle.  Boundary nodes are eliminated, so a scalar field
is a vector over the ``n_nodes`` interior nodes and a planar vector field
stacks two such vectors.  The discrete Dirichlet form ``h^n z^T L z``
approximates the integral of ``|grad z|^2`` and is the inner product used
throughout the package.

Node ordering in 2D is C order over ``meshgrid(..., indexing='ij')``: the
index of node ``(i1, i2)`` is ``i1 * n2 + i2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

DEFAULT_MAX_NODES = 4096


@dataclass(frozen=True)
class GridDomain:
    """Interior-node grid over a rectangle with Dirichlet boundary.

    Attributes:
        dim: spatial dimension, 1 or 2.
        bounds: per-axis ``(lower, upper)`` pairs.
        shape: interior node count per axis.
        spacing: per-axis mesh width ``(upper - lower) / (nodes + 1)``.
        nodes: ``(n_nodes, dim)`` array of interior node coordinates.
    """

    dim: int
    bounds: tuple[tuple[float, float], ...]
    shape: tuple[int, ...]
    spacing: tuple[float, ...]
    nodes: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def quad_weight(self) -> float:
        """Rectangle rule weight for one interior node."""
        return float(np.prod(self.spacing))


def build_grid(
    bounds,
    nodes_per_axis,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> GridDomain:
    """Build an interior grid on an interval or rectangle.

    Args:
        bounds: ``(a, b)`` for 1D or ``((a1, b1), (a2, b2))`` for 2D.
        nodes_per_axis: int or per-axis sequence of interior node counts.
        max_nodes: cap on the total interior node count.

    Returns:
        A validated GridDomain.

    Raises:
        ValueError: on empty axes, non-increasing bounds, or a node count
            above ``max_nodes``.
    """
    arr = np.asarray(bounds, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] not in (1, 2):
        raise ValueError(f"bounds must be (a, b) or ((a1, b1), (a2, b2)), got {bounds!r}")
    dim = arr.shape[0]
    if np.isscalar(nodes_per_axis):
        counts = (int(nodes_per_axis),) * dim
    else:
        counts = tuple(int(c) for c in nodes_per_axis)
    if len(counts) != dim:
        raise ValueError(f"nodes_per_axis has {len(counts)} entries for a {dim}D domain")
    for c in counts:
        if c < 2:
            raise ValueError(f"need at least two interior nodes per axis, got {c}")
    for a, b in arr:
        if not b > a:
            raise ValueError(f"degenerate axis bounds ({a}, {b})")
    total = int(np.prod(counts))
    if total > max_nodes:
        raise ValueError(f"grid has {total} nodes, exceeding the cap of {max_nodes}")

    spacing = tuple(float((b - a) / (c + 1)) for (a, b), c in zip(arr, counts))
    axes = [
        a + h * np.arange(1, c + 1)
        for (a, _), h, c in zip(arr, spacing, counts)
    ]
    if dim == 1:
        nodes = axes[0][:, None]
    else:
        mesh = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=1)
    return GridDomain(
        dim=dim,
        bounds=tuple((float(a), float(b)) for a, b in arr),
        shape=counts,
        spacing=spacing,
        nodes=nodes,
    )


def _laplacian_1d(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, 2.0 / h**2)
    off = np.full(n - 1, -1.0 / h**2)
    return sp.diags([off, main, off], offsets=[-1, 0, 1], format="csr")


def laplacian(g: GridDomain) -> sp.csr_matrix:
    """Scalar negative Laplacian with Dirichlet boundary, ``n_nodes`` square.

    1D uses the second difference stencil ``(2, -1) / h^2``; 2D the 5-point
    stencil assembled as a Kronecker sum in the grid's node ordering.
    """
    if g.dim == 1:
        return _laplacian_1d(g.shape[0], g.spacing[0])
    l1 = _laplacian_1d(g.shape[0], g.spacing[0])
    l2 = _laplacian_1d(g.shape[1], g.spacing[1])
    i1 = sp.identity(g.shape[0], format="csr")
    i2 = sp.identity(g.shape[1], format="csr")
    return (sp.kron(l1, i2) + sp.kron(i1, l2)).tocsr()


def laplacian_eigenvalues_1d(g: GridDomain) -> np.ndarray:
    """Closed-form eigenvalues of the 1D discrete operator, ascending.

    For mesh width ``h`` on an interval of length ``ell`` with ``n``
    interior nodes these are ``(2/h^2) (1 - cos(j pi h / ell))``.
    """
    if g.dim != 1:
        raise ValueError("closed form applies to 1D grids only")
    n = g.shape[0]
    h = g.spacing[0]
    j = np.arange(1, n + 1)
    return (2.0 / h**2) * (1.0 - np.cos(j * np.pi / (n + 1)))


def split_components(z: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Views (u, v) of a stacked planar field of length 2n."""
    z = np.asarray(z)
    if z.shape[-1] != 2 * n:
        raise ValueError(f"stacked field has length {z.shape[-1]}, expected {2 * n}")
    return z[..., :n], z[..., n:]


def stack_components(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.concatenate([u, v], axis=-1)


def apply_block_laplacian(lap: sp.csr_matrix, z: np.ndarray) -> np.ndarray:
    """Apply the scalar Laplacian to both components of a stacked field.

    Accepts a single vector of length 2n or a batch shaped (m, 2n).
    """
    n = lap.shape[0]
    single = z.ndim == 1
    zb = np.atleast_2d(z)
    u, v = zb[:, :n], zb[:, n:]
    out = np.concatenate([(lap @ u.T).T, (lap @ v.T).T], axis=1)
    return out[0] if single else out


def h10_inner(g: GridDomain, lap: sp.csr_matrix, z: np.ndarray, w: np.ndarray) -> float:
    """Discrete H^1_0 inner product of two stacked planar fields."""
    return g.quad_weight * float(np.dot(apply_block_laplacian(lap, z), w))


def h10_norm(g: GridDomain, lap: sp.csr_matrix, z: np.ndarray) -> float:
    return float(np.sqrt(max(h10_inner(g, lap, z, z), 0.0)))


def l2_inner(g: GridDomain, z: np.ndarray, w: np.ndarray) -> float:
    """Discrete L^2 inner product (rectangle rule) of stacked fields."""
    return g.quad_weight * float(np.dot(np.asarray(z), np.asarray(w)))


def lp_norm(g: GridDomain, z: np.ndarray, p: float) -> float:
    """Weighted L^p norm of a planar field using nodal Euclidean magnitude.

    ``p = inf`` returns the max nodal magnitude.  A constant field of
    magnitude 1 on a unit domain gives (N h^n)^(1/p), which tends to the
    measure of the domain as the grid refines.
    """
    n = g.n_nodes
    u, v = split_components(np.asarray(z, dtype=float), n)
    mag = np.hypot(u, v)
    if np.isinf(p):
        return float(mag.max(initial=0.0))
    if p < 2:
        raise ValueError(f"p must lie in [2, inf], got {p}")
    return float((g.quad_weight * np.sum(mag**p)) ** (1.0 / p))


def sobolev_embedding_constant(g: GridDomain, lap: sp.csr_matrix) -> float:
    """Constant S with |z|_2 <= S ||z|| on the grid.

    Equals ``lambda_min(L)^(-1/2)`` since both quadratic forms carry the
    same quadrature weight.
    """
    if g.dim == 1:
        lam1 = laplacian_eigenvalues_1d(g)[0]
    else:
        from scipy.sparse.linalg import eigsh

        k = min(2, lap.shape[0] - 1)
        lam1 = float(eigsh(lap, k=k, which="SM", return_eigenvectors=False).min())
    return float(1.0 / np.sqrt(lam1))
