"""Symmetric 2x2 matrix fields over the domain and their pointwise order.

A MatrixField maps domain points to symmetric 2x2 matrices.  Fields back
the weights of the eigenvalue problem (the linearizations at the origin
and at infinity) and the monotonicity bound of the reduction condition.
Constructors guarantee symmetry; positive definiteness is checked at the
grid nodes where a role requires it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import expressions as ex
from .grid import GridDomain

ROLE_TAGS = ("A0", "Ainf", "beta", "other")


@dataclass(frozen=True)
class MatrixField:
    """Pointwise symmetric 2x2 matrix on the domain.

    Attributes:
        evaluator: maps an (k, dim) array of points to (k, 2, 2) matrices.
        label: role tag, one of ROLE_TAGS.
        description: human-readable provenance for reports.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    label: str = "other"
    description: str = ""

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.asarray(self.evaluator(points), dtype=float)
        if out.shape != (points.shape[0], 2, 2):
            raise ValueError(
                f"matrix field returned shape {out.shape}, "
                f"expected {(points.shape[0], 2, 2)}"
            )
        return out


def constant_field(mat, label: str = "other", description: str = "") -> MatrixField:
    mat = np.asarray(mat, dtype=float)
    if mat.shape != (2, 2):
        raise ValueError(f"constant matrix must be 2x2, got {mat.shape}")
    sym = 0.5 * (mat + mat.T)

    def evaluator(points):
        return np.broadcast_to(sym, (points.shape[0], 2, 2)).copy()

    desc = description or f"constant {sym.tolist()}"
    return MatrixField(evaluator, label, desc)


def diagonal_field(d1: float, d2: float, label: str = "other") -> MatrixField:
    return constant_field(np.diag([d1, d2]), label, f"diag({d1}, {d2})")


def scaled_field(field: MatrixField, c: float) -> MatrixField:
    def evaluator(points):
        return c * field(points)

    return MatrixField(evaluator, field.label, f"{c} * ({field.description})")


def expression_field(
    a11: str, a12: str, a22: str, label: str = "other"
) -> MatrixField:
    """Matrix field from grammar expressions in the space variables x1, x2."""
    asts = [ex.constant_fold(ex.parse(s)) for s in (a11, a12, a22)]
    for s, node in zip((a11, a12, a22), asts):
        bad = ex.free_variables(node) - {"x1", "x2"}
        if bad:
            raise ex.ExpressionError(
                f"field entry {s!r} uses non-spatial variables {sorted(bad)}", 1
            )

    def evaluator(points):
        env = {"x1": points[:, 0]}
        env["x2"] = points[:, 1] if points.shape[1] > 1 else np.zeros(len(points))
        out = np.empty((points.shape[0], 2, 2))
        vals = [np.broadcast_to(ex.evaluate(a, env), (points.shape[0],)) for a in asts]
        out[:, 0, 0] = vals[0]
        out[:, 0, 1] = out[:, 1, 0] = vals[1]
        out[:, 1, 1] = vals[2]
        return out

    return MatrixField(evaluator, label, f"[[{a11}, {a12}], [{a12}, {a22}]]")


def sym22_eigenvalues(mats: np.ndarray) -> np.ndarray:
    """Closed-form eigenvalues of a batch of symmetric 2x2 matrices.

    Returns (k, 2), ascending per row.
    """
    a = mats[:, 0, 0]
    b = mats[:, 0, 1]
    c = mats[:, 1, 1]
    mean = 0.5 * (a + c)
    rad = np.sqrt((0.5 * (a - c)) ** 2 + b**2)
    return np.stack([mean - rad, mean + rad], axis=1)


def assert_spd_on_grid(field: MatrixField, g: GridDomain) -> None:
    """Raise if the field is not symmetric positive definite at some node."""
    mats = field(g.nodes)
    asym = np.abs(mats[:, 0, 1] - mats[:, 1, 0]).max(initial=0.0)
    if asym > 0:
        raise ValueError(f"matrix field {field.label} asymmetric by {asym}")
    lam = sym22_eigenvalues(mats)
    bad = np.flatnonzero(lam[:, 0] <= 0)
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"matrix field {field.label} not positive definite at node {i}, "
            f"x = {g.nodes[i].tolist()}, eigenvalues {lam[i].tolist()}"
        )


def matrix_order_compare(
    a: MatrixField,
    b: MatrixField,
    g: GridDomain,
    strict_fraction: float = 0.0,
    tol: float = 1e-10,
) -> str:
    """Pointwise Loewner comparison of A against B on the grid nodes.

    Returns "leq" when B - A is positive semidefinite at every node,
    "strict_preceq" when additionally B - A is positive definite on at
    least max(1, strict_fraction * N) nodes (the discrete surrogate for a
    positive-measure strictness region), otherwise "incomparable".
    """
    diff = b(g.nodes) - a(g.nodes)
    scale = max(np.abs(diff).max(initial=0.0), 1.0)
    lam_min = sym22_eigenvalues(diff)[:, 0]
    if lam_min.min(initial=0.0) < -tol * scale:
        return "incomparable"
    need = max(1, int(np.ceil(strict_fraction * g.n_nodes)))
    strict_nodes = int(np.count_nonzero(lam_min > tol * scale))
    return "strict_preceq" if strict_nodes >= need else "leq"
