"""The discrete action functional in the H^1_0 geometry.

Phi(z) = (1/2)|z|^2 - integral of F(x, z), with gradient taken as the
Riesz representative in the discrete H^1_0 inner product.  That choice
makes the gradient literally identity-minus-compact: grad Phi = z - K(z)
where K(z) solves the linear Dirichlet problem with load gradF(x, z).
All the monotonicity inequalities the reduction relies on are inner
products in this metric, so no raw load vectors ever escape this module.

One sparse factorization of the scalar Laplacian is cached per handle
and reused for both components and for every multi-RHS solve downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import GridDomain, h10_inner, laplacian, split_components, stack_components
from .problem import NonlinearityModel


@dataclass(frozen=True)
class FunctionalHandle:
    grid: GridDomain
    model: NonlinearityModel
    lap: sp.csr_matrix = field(repr=False)
    lu: spla.SuperLU = field(repr=False)


def build_functional(g: GridDomain, model: NonlinearityModel) -> FunctionalHandle:
    lap = laplacian(g)
    lu = spla.splu(lap.tocsc())
    return FunctionalHandle(grid=g, model=model, lap=lap, lu=lu)


def nodal_pairs(g: GridDomain, z: np.ndarray) -> np.ndarray:
    """Stacked (2N,) vector viewed as (N, 2) nodal planar values."""
    u, v = split_components(z, g.n_nodes)
    return np.stack([u, v], axis=1)


def solve_block(h: FunctionalHandle, rhs: np.ndarray) -> np.ndarray:
    """Apply L^{-1} componentwise to one or many stacked vectors.

    rhs has shape (2N,) or (2N, m); the factorization is shared.
    """
    n = h.grid.n_nodes
    single = rhs.ndim == 1
    r = rhs[:, None] if single else rhs
    out = np.empty_like(r, dtype=float)
    out[:n] = h.lu.solve(np.ascontiguousarray(r[:n], dtype=float))
    out[n:] = h.lu.solve(np.ascontiguousarray(r[n:], dtype=float))
    return out[:, 0] if single else out


def phi_value(h: FunctionalHandle, z: np.ndarray) -> float:
    g = h.grid
    dirichlet = 0.5 * h10_inner(g, h.lap, z, z)
    density = h.model.value(g.nodes, nodal_pairs(g, z))
    return float(dirichlet - g.quad_weight * density.sum())


def compact_part(h: FunctionalHandle, z: np.ndarray) -> np.ndarray:
    """K(z): the Riesz representative of the nonlinear load.

    <K(z), w> in H^1_0 equals the quadrature of gradF(x, z).w, which
    reduces to the componentwise Dirichlet solve L K = gradF; the
    quadrature weight cancels against the one in the inner product.
    """
    g = h.grid
    load = h.model.gradient(g.nodes, nodal_pairs(g, z))
    return solve_block(h, stack_components(load[:, 0], load[:, 1]))


def phi_gradient(h: FunctionalHandle, z: np.ndarray) -> np.ndarray:
    return z - compact_part(h, z)


def residual_norm(h: FunctionalHandle, z: np.ndarray) -> float:
    r = phi_gradient(h, z)
    return float(np.sqrt(h10_inner(h.grid, h.lap, r, r)))
