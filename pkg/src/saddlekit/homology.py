"""Critical groups and homological identity checks on model functionals.

Desk-scale counterpart of the PDE pipeline: explicit functions on R^n
(n <= 4) whose critical groups, groups at infinity, and Brouwer indices
are computable by cubical approximation.  On models carrying a
coordinate split the same saddle reduction used for the PDE runs here
through ``ModelReduction``, which is what makes the shift identities
checkable: both sides of each identity are computed independently and
compared.

Stability policy: every homology result is computed at two resolutions
and flagged ``stable`` only on agreement.  Hypotheses the theorems need
(isolated critical point, gradient transverse on the box boundary) are
verified by sampling; failures downgrade the result with a warning
instead of refusing to compute.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .cubical import (
    BettiVector,
    Box,
    CubicalPair,
    EXCISION_RADIUS_CELLS,
    box_around,
    excision_ball_mask,
    lattice_points,
    relative_homology_z2,
    sublevel_mask,
)
from .problem import CheckReport
from .reduction import ModelReduction, _fd_jacobian
from .search import SearchStrategy, SyntheticHandle, find_critical_points
from .spectral import A_MINUS_CASE, A_PLUS_CASE

SCHEMA_VERSION = 1
MAX_MODEL_DIM = 4
MIN_RESOLUTION = 16
DEFAULT_RESOLUTIONS = (16, 24)
INFINITY_RESOLUTIONS = (24, 32)

ROOT_TOL = 1e-9


@dataclass(frozen=True)
class ModelFunctional:
    """Explicit functional on R^n with vectorized evaluators.

    ``value`` maps arrays of shape (..., n) to (...,); ``gradient`` maps
    (..., n) to (..., n).  ``split = (n_minus, n_plus)`` partitions the
    coordinates into a v-block and a fiber, with ``side`` naming the
    monotonicity case the fiber is supposed to satisfy.
    """

    name: str
    n: int
    value: object
    gradient: object
    split: tuple | None = None
    side: str | None = None

    @property
    def mu(self) -> int:
        if self.split is None:
            raise ValueError(f"model {self.name} carries no coordinate split")
        return self.split[1]


def validate_model_functional(
    m: ModelFunctional, rng=None, n_points: int = 30, rel_tol: float = 1e-6
) -> CheckReport:
    """Check the gradient against central finite differences."""
    rng = np.random.default_rng(0) if rng is None else rng
    worst = 0.0
    witness = None
    for _ in range(n_points):
        z = rng.uniform(-1.5, 1.5, size=m.n)
        g = np.asarray(m.gradient(z), dtype=float)
        fd = np.empty(m.n)
        for i in range(m.n):
            h = 1e-6 * max(1.0, abs(z[i]))
            zp, zm = z.copy(), z.copy()
            zp[i] += h
            zm[i] -= h
            fd[i] = (float(m.value(zp)) - float(m.value(zm))) / (2 * h)
        err = float(np.max(np.abs(fd - g) / (1.0 + np.abs(g))))
        if err > worst:
            worst = err
            witness = {"point": z.copy(), "fd": fd, "gradient": g}
    holds = worst <= rel_tol
    return CheckReport(
        name="model_gradient_consistency",
        holds=holds,
        worst=worst,
        witness=None if holds else witness,
        details={"model": m.name, "n_points": n_points},
    )


# ---------------------------------------------------------------------------
# built-in model battery


def _component(z, i):
    return np.asarray(z, dtype=float)[..., i]


def builtin_models() -> dict:
    """The shipped battery of closed-form models, keyed by name.

    Split models put the v-block first.  All fibers labeled with the
    concave case carry an exact monotonicity constant of 2; the two
    convex-fiber models serve the no-shift identities.
    """

    def grad(*comps):
        def g(z):
            z = np.asarray(z, dtype=float)
            return np.stack([c(z) for c in comps], axis=-1)

        return g

    models = [
        ModelFunctional(
            name="bowl_2d",
            n=2,
            value=lambda z: _component(z, 0) ** 2 + _component(z, 1) ** 2,
            gradient=grad(lambda z: 2 * _component(z, 0), lambda z: 2 * _component(z, 1)),
        ),
        ModelFunctional(
            name="monkey_2d",
            n=2,
            value=lambda z: _component(z, 0) ** 3 - 3 * _component(z, 0) * _component(z, 1) ** 2,
            gradient=grad(
                lambda z: 3 * _component(z, 0) ** 2 - 3 * _component(z, 1) ** 2,
                lambda z: -6 * _component(z, 0) * _component(z, 1),
            ),
        ),
        ModelFunctional(
            name="double_well_2d",
            n=2,
            value=lambda z: (_component(z, 0) ** 2 - 1) ** 2 + _component(z, 1) ** 2,
            gradient=grad(
                lambda z: 4 * _component(z, 0) * (_component(z, 0) ** 2 - 1),
                lambda z: 2 * _component(z, 1),
            ),
        ),
        ModelFunctional(
            name="saddle_2d",
            n=2,
            value=lambda z: _component(z, 0) ** 2 - _component(z, 1) ** 2,
            gradient=grad(lambda z: 2 * _component(z, 0), lambda z: -2 * _component(z, 1)),
            split=(1, 1),
            side=A_MINUS_CASE,
        ),
        ModelFunctional(
            name="quartic_fiber_saddle",
            n=2,
            value=lambda z: _component(z, 0) ** 4 - _component(z, 1) ** 2,
            gradient=grad(lambda z: 4 * _component(z, 0) ** 3, lambda z: -2 * _component(z, 1)),
            split=(1, 1),
            side=A_MINUS_CASE,
        ),
        ModelFunctional(
            name="coupled_quartic",
            n=2,
            value=lambda z: _component(z, 0) ** 4
            - _component(z, 1) ** 2
            - 2 * _component(z, 0) * _component(z, 1),
            gradient=grad(
                lambda z: 4 * _component(z, 0) ** 3 - 2 * _component(z, 1),
                lambda z: -2 * _component(z, 1) - 2 * _component(z, 0),
            ),
            split=(1, 1),
            side=A_MINUS_CASE,
        ),
        ModelFunctional(
            name="monkey_fiber",
            n=3,
            value=lambda z: _component(z, 0) ** 3
            - 3 * _component(z, 0) * _component(z, 1) ** 2
            - _component(z, 2) ** 2,
            gradient=grad(
                lambda z: 3 * _component(z, 0) ** 2 - 3 * _component(z, 1) ** 2,
                lambda z: -6 * _component(z, 0) * _component(z, 1),
                lambda z: -2 * _component(z, 2),
            ),
            split=(2, 1),
            side=A_MINUS_CASE,
        ),
        ModelFunctional(
            name="plane_saddle_mu2",
            n=3,
            value=lambda z: _component(z, 0) ** 2
            - _component(z, 1) ** 2
            - _component(z, 2) ** 2,
            gradient=grad(
                lambda z: 2 * _component(z, 0),
                lambda z: -2 * _component(z, 1),
                lambda z: -2 * _component(z, 2),
            ),
            split=(1, 2),
            side=A_MINUS_CASE,
        ),
        ModelFunctional(
            name="cap_2d",
            n=2,
            value=lambda z: -_component(z, 0) ** 2 - _component(z, 1) ** 2,
            gradient=grad(lambda z: -2 * _component(z, 0), lambda z: -2 * _component(z, 1)),
            split=(1, 1),
            side=A_MINUS_CASE,
        ),
        ModelFunctional(
            name="well_fiber",
            n=2,
            value=lambda z: (_component(z, 0) ** 2 - 1) ** 2 + _component(z, 1) ** 2,
            gradient=grad(
                lambda z: 4 * _component(z, 0) * (_component(z, 0) ** 2 - 1),
                lambda z: 2 * _component(z, 1),
            ),
            split=(1, 1),
            side=A_PLUS_CASE,
        ),
        ModelFunctional(
            name="coercive_quartic_fiber",
            n=2,
            value=lambda z: _component(z, 0) ** 2 + _component(z, 1) ** 4,
            gradient=grad(lambda z: 2 * _component(z, 0), lambda z: 4 * _component(z, 1) ** 3),
            split=(1, 1),
            side=A_PLUS_CASE,
        ),
    ]
    return {m.name: m for m in models}


# ---------------------------------------------------------------------------
# reduction bridge


def model_reduction(m: ModelFunctional, inner_tol: float = 1e-11) -> ModelReduction:
    """Wrap a split model for the saddle reduction machinery."""
    if m.split is None:
        raise ValueError(f"model {m.name} carries no coordinate split")
    return ModelReduction(
        value=lambda z: float(m.value(np.asarray(z, dtype=float))),
        gradient=lambda z: np.asarray(m.gradient(np.asarray(z, dtype=float)), dtype=float),
        n_dim=m.n,
        n_minus=m.split[0],
        side=m.side or A_MINUS_CASE,
        inner_tol=inner_tol,
    )


def reduced_functional(m: ModelFunctional, inner_tol: float = 1e-11) -> ModelFunctional:
    """The reduced functional of a split model, as a model of its own.

    Evaluation loops over points, each an inner fiber solve; the warm
    start makes raster scans over lattices cheap.
    """
    mr = model_reduction(m, inner_tol=inner_tol)
    nm = m.split[0]

    def value(pts):
        pts = np.asarray(pts, dtype=float)
        flat = pts.reshape(-1, nm)
        out = np.empty(flat.shape[0])
        for i in range(flat.shape[0]):
            out[i] = mr.reduced_value(flat[i])
        return out.reshape(pts.shape[:-1])

    def gradient(pts):
        pts = np.asarray(pts, dtype=float)
        flat = pts.reshape(-1, nm)
        out = np.empty_like(flat)
        for i in range(flat.shape[0]):
            out[i] = mr.reduced_gradient(flat[i])
        return out.reshape(pts.shape)

    return ModelFunctional(
        name=f"{m.name}_reduced", n=nm, value=value, gradient=gradient
    )


def _model_triples(n_minus, mu, rng, n_triples=120, radii=(0.1, 1.0, 3.0)):
    triples = []
    for i in range(n_triples):
        rad = radii[i % len(radii)]
        v = rng.normal(size=n_minus)
        nv = np.linalg.norm(v)
        if nv > 0:
            v *= rad / nv
        w1 = rng.normal(size=mu) * rad
        w2 = rng.normal(size=mu) * rad
        triples.append((v, w1, w2))
    return triples


# ---------------------------------------------------------------------------
# cubical pairs and critical groups


def cubical_sublevel_pair(
    m: ModelFunctional,
    u,
    box_radius: float,
    level: float | None = None,
    resolution: int = DEFAULT_RESOLUTIONS[1],
    center=None,
) -> CubicalPair:
    """Sublevel pair (f_c in the box, part away from u) for one resolution.

    The box is centered at ``u`` unless an explicit center is given, in
    which case ``u`` must sit far enough inside for the excision ball.
    """
    if m.n > MAX_MODEL_DIM:
        raise ValueError(f"model dimension {m.n} exceeds the cap of {MAX_MODEL_DIM}")
    if resolution < MIN_RESOLUTION:
        raise ValueError(f"resolution {resolution} is below {MIN_RESOLUTION} cells per axis")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.size != m.n:
        raise ValueError(f"expected a point in R^{m.n}, got {u.size} coordinates")
    box = box_around(u if center is None else center, box_radius)
    h = float(np.max(box.widths) / resolution)
    margin = min(
        float(np.min(u - np.asarray(box.lo))), float(np.min(np.asarray(box.hi) - u))
    )
    if margin <= EXCISION_RADIUS_CELLS * h:
        raise ValueError(
            "critical point lies on or too close to the box boundary for excision"
        )
    values = np.asarray(m.value(lattice_points(box, resolution)), dtype=float)
    if level is None:
        level = float(m.value(u))
    sub = sublevel_mask(values, level)
    if not sub.any():
        raise ValueError("sublevel subcomplex is empty in the box")
    exc = sub & excision_ball_mask(box, resolution, u)
    return CubicalPair(
        box=box, resolution=resolution, subcomplex_mask=sub, excision_mask=exc, level=level
    )


def _newton_root(gradfn, z0, tol=ROOT_TOL, max_iter=50, step_cap=None):
    z = np.array(z0, dtype=float)
    for _ in range(max_iter):
        g = np.asarray(gradfn(z), dtype=float)
        if np.linalg.norm(g) <= tol:
            return z, True
        try:
            jac = _fd_jacobian(gradfn, z, g)
            step = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError:
            return z, False
        if not np.all(np.isfinite(step)):
            return z, False
        if step_cap is not None:
            ns = np.linalg.norm(step)
            if ns > step_cap:
                step *= step_cap / ns
        z = z + step
    return z, bool(np.linalg.norm(np.asarray(gradfn(z), dtype=float)) <= tol)


def _gradient_zeros(
    m: ModelFunctional,
    center,
    box_radius: float,
    resolution: int = 16,
    n_starts: int = 16,
    exclude_radius: float = 0.0,
):
    """Zeros of the gradient in the box, by lattice scan plus Newton polish.

    Returns deduplicated roots at least ``exclude_radius`` away from the
    center, together with their values.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    box = box_around(center, box_radius)
    pts = lattice_points(box, resolution).reshape(-1, m.n)
    gn = np.linalg.norm(np.asarray(m.gradient(pts), dtype=float), axis=-1)
    dist = np.linalg.norm(pts - center, axis=-1)
    usable = dist >= exclude_radius
    order = np.argsort(np.where(usable, gn, np.inf))[:n_starts]

    def gradfn(z):
        return np.asarray(m.gradient(z), dtype=float)

    roots = []
    for idx in order:
        if not usable[idx]:
            continue
        z, ok = _newton_root(gradfn, pts[idx], step_cap=0.5 * box_radius)
        if not ok:
            continue
        if np.any(z < np.asarray(box.lo)) or np.any(z > np.asarray(box.hi)):
            continue
        if np.linalg.norm(z - center) < exclude_radius:
            continue
        if any(np.linalg.norm(z - r) < 1e-6 * (1 + np.linalg.norm(z)) for r in roots):
            continue
        roots.append(z)
    return [(r, float(m.value(r))) for r in roots]


def critical_groups(
    m: ModelFunctional,
    u,
    box_radius: float = 0.5,
    level: float | None = None,
    resolutions: tuple = DEFAULT_RESOLUTIONS,
    verify_isolation: bool = True,
    details: dict | None = None,
) -> BettiVector:
    """Critical groups of ``m`` at ``u`` over GF(2).

    Computes the excised sublevel pair at two resolutions; the returned
    ranks are the finer ones, with ``stable`` recording agreement.
    Isolation of the critical point is checked by a sampled gradient
    scan; a violation downgrades the result with a warning rather than
    refusing.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    isolated = True
    if verify_isolation:
        h = 2 * box_radius / resolutions[0]
        others = _gradient_zeros(
            m, u, box_radius, resolution=resolutions[0],
            exclude_radius=EXCISION_RADIUS_CELLS * h,
        )
        if others:
            isolated = False
            warnings.warn(
                f"critical point of {m.name} at {u} is not isolated in the box: "
                f"another gradient zero near {others[0][0]}; result is unverified",
                stacklevel=2,
            )
    vectors = [
        relative_homology_z2(
            cubical_sublevel_pair(m, u, box_radius, level=level, resolution=r)
        )
        for r in resolutions
    ]
    stable = all(v.ranks == vectors[-1].ranks for v in vectors)
    if details is not None:
        details["ranks_by_resolution"] = {
            r: v.ranks for r, v in zip(resolutions, vectors)
        }
        details["resolutions"] = tuple(resolutions)
        details["isolated"] = isolated
        details["box_radius"] = box_radius
    return BettiVector(ranks=vectors[-1].ranks, stable=bool(stable))


def critical_groups_at_infinity(
    m: ModelFunctional,
    alpha: float,
    box_radius: float,
    resolutions: tuple = INFINITY_RESOLUTIONS,
    check_critical_values: bool = True,
    details: dict | None = None,
) -> BettiVector:
    """Homology of (box, sublevel alpha): the finite-box surrogate of C(f, infinity).

    The surrogate is trustworthy only when alpha lies below every
    critical value (checked by scan) and the gradient does not vanish on
    the sublevel part of the box boundary (sampled; failure sets a
    caveat flag and warns).
    """
    if m.n > MAX_MODEL_DIM:
        raise ValueError(f"model dimension {m.n} exceeds the cap of {MAX_MODEL_DIM}")
    center = np.zeros(m.n)
    if check_critical_values:
        for root, val in _gradient_zeros(m, center, box_radius, resolution=16):
            if val <= alpha:
                raise ValueError(
                    f"alpha {alpha} is not below the critical value {val:.6g} at {root}"
                )

    box = box_around(center, box_radius)
    vectors = []
    boundary_ok = True
    boundary_grad_min = np.inf
    for r in resolutions:
        pts = lattice_points(box, r)
        values = np.asarray(m.value(pts), dtype=float)
        low = sublevel_mask(values, alpha)
        pair = CubicalPair(
            box=box,
            resolution=r,
            subcomplex_mask=np.ones_like(low),
            excision_mask=low,
            level=alpha,
        )
        vectors.append(relative_homology_z2(pair))
        if r == resolutions[0]:
            edge = np.zeros(values.shape, dtype=bool)
            for ax in range(m.n):
                sl = [slice(None)] * m.n
                sl[ax] = 0
                edge[tuple(sl)] = True
                sl[ax] = -1
                edge[tuple(sl)] = True
            sel = edge & (values <= alpha + 1e-12 * max(1.0, float(np.abs(values).max())))
            if sel.any():
                gnorm = np.linalg.norm(
                    np.asarray(m.gradient(pts[sel]), dtype=float), axis=-1
                )
                gscale = max(
                    1.0,
                    float(
                        np.max(
                            np.linalg.norm(
                                np.asarray(m.gradient(pts.reshape(-1, m.n)), dtype=float),
                                axis=-1,
                            )
                        )
                    ),
                )
                boundary_grad_min = float(gnorm.min())
                boundary_ok = boundary_grad_min > 1e-6 * gscale
    if not boundary_ok:
        warnings.warn(
            f"gradient of {m.name} nearly vanishes on the sublevel boundary region "
            f"(min norm {boundary_grad_min:.3e}); groups at infinity are unverified",
            stacklevel=2,
        )
    stable = all(v.ranks == vectors[-1].ranks for v in vectors)
    if details is not None:
        details["ranks_by_resolution"] = {
            r: v.ranks for r, v in zip(resolutions, vectors)
        }
        details["resolutions"] = tuple(resolutions)
        details["boundary_ok"] = bool(boundary_ok)
        details["boundary_grad_min"] = boundary_grad_min
        details["alpha"] = float(alpha)
    return BettiVector(ranks=vectors[-1].ranks, stable=bool(stable))


# ---------------------------------------------------------------------------
# the homological identities


def _shifted_match(betti_f: BettiVector, betti_phi: BettiVector, shift: int, top: int) -> bool:
    return all(betti_f[q] == betti_phi[q - shift] for q in range(top + 1))


def verify_shift_theorem(
    m: ModelFunctional,
    u,
    box_radius: float = 0.5,
    resolutions: tuple = DEFAULT_RESOLUTIONS,
    seed: int = 0,
) -> dict:
    """Check C_q(f, u) against C_{q-mu}(phi, v) on a concave-fiber model.

    Both sides are computed independently: the full model by cubical
    pairs in R^n, the reduced side by running the saddle reduction and
    taking cubical pairs of phi in the v-block.
    """
    if m.split is None or (m.side or A_MINUS_CASE) != A_MINUS_CASE:
        raise ValueError("shift theorem check needs a concave-fiber split model")
    if m.mu > 2:
        raise ValueError(f"fiber dimension {m.mu} exceeds the supported cap of 2")
    rng = np.random.default_rng(seed)
    mr = model_reduction(m)
    condition = mr.verify_condition(_model_triples(m.split[0], m.mu, rng))
    if not condition.holds:
        warnings.warn(
            f"fiber monotonicity failed on {m.name} (worst {condition.worst:.3e}); "
            "shift check is unverified",
            stacklevel=2,
        )
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v_bar = u[: m.split[0]]
    psi = mr.solve_psi(v_bar)
    z_bar = mr.lift(v_bar, psi)
    if np.linalg.norm(z_bar - u) > 1e-6 * (1 + np.linalg.norm(u)):
        warnings.warn(
            f"supplied point of {m.name} is off the reduced manifold by "
            f"{np.linalg.norm(z_bar - u):.3e}; using the lifted point",
            stacklevel=2,
        )

    details_f: dict = {}
    details_phi: dict = {}
    betti_f = critical_groups(
        m, z_bar, box_radius, resolutions=resolutions, details=details_f
    )
    phi = reduced_functional(m)
    betti_phi = critical_groups(
        phi, v_bar, box_radius, resolutions=resolutions, details=details_phi
    )
    holds = _shifted_match(betti_f, betti_phi, m.mu, m.n)
    return {
        "model_id": m.name,
        "operation": "shift_theorem",
        "betti_f": betti_f,
        "betti_phi": betti_phi,
        "mu": int(m.mu),
        "shift_holds": bool(holds),
        "stable": bool(betti_f.stable and betti_phi.stable),
        "resolutions": tuple(resolutions),
        "condition": condition,
        "point": z_bar.tolist(),
    }


def verify_theorem_A(
    m: ModelFunctional,
    variant: str,
    u=None,
    alpha: float | None = None,
    box_radius: float | None = None,
    resolutions: tuple | None = None,
) -> dict:
    """Check one variant of the reduction identities.

    (i): groups at infinity agree, convex fiber, no shift.
    (ii): groups at infinity shift by mu, concave fiber.
    (iii): local groups agree at a critical point, convex fiber.
    """
    if variant not in ("i", "ii", "iii"):
        raise ValueError(f"variant must be i, ii, or iii, got {variant!r}")
    if m.split is None:
        raise ValueError("theorem A check needs a split model")
    needed = A_MINUS_CASE if variant == "ii" else A_PLUS_CASE
    if (m.side or A_MINUS_CASE) != needed:
        raise ValueError(
            f"variant {variant} needs a {needed} split, model {m.name} is {m.side}"
        )
    mu = m.mu
    shift = mu if variant == "ii" else 0
    phi = reduced_functional(m)
    mr = model_reduction(m)

    if variant == "iii":
        if u is None:
            raise ValueError("variant iii needs the critical point u")
        box_radius = 0.5 if box_radius is None else box_radius
        resolutions = DEFAULT_RESOLUTIONS if resolutions is None else resolutions
        u = np.atleast_1d(np.asarray(u, dtype=float))
        v_bar = u[: m.split[0]]
        z_bar = mr.lift(v_bar, mr.solve_psi(v_bar))
        betti_f = critical_groups(m, z_bar, box_radius, resolutions=resolutions)
        betti_phi = critical_groups(phi, v_bar, box_radius, resolutions=resolutions)
        extra = {"point": z_bar.tolist()}
    else:
        box_radius = 3.0 if box_radius is None else box_radius
        resolutions = INFINITY_RESOLUTIONS if resolutions is None else resolutions
        if alpha is None:
            crits = _gradient_zeros(m, np.zeros(m.n), box_radius, resolution=16)
            vals = [v for _, v in crits] or [0.0]
            alpha = min(vals) - max(1.0, 0.5 * abs(min(vals)))
        betti_f = critical_groups_at_infinity(
            m, alpha, box_radius, resolutions=resolutions
        )
        betti_phi = critical_groups_at_infinity(
            phi, alpha, box_radius, resolutions=resolutions
        )
        extra = {"alpha": float(alpha)}

    holds = _shifted_match(betti_f, betti_phi, shift, m.n)
    report = {
        "model_id": m.name,
        "operation": f"theorem_A_{variant}",
        "variant": variant,
        "betti_f": betti_f,
        "betti_phi": betti_phi,
        "mu": int(mu),
        "shift": int(shift),
        "holds": bool(holds),
        "stable": bool(betti_f.stable and betti_phi.stable),
        "resolutions": tuple(resolutions),
    }
    report.update(extra)
    return report


# ---------------------------------------------------------------------------
# Brouwer indices


def _signed_preimage_count(
    m: ModelFunctional, u, box_radius: float, y, resolution: int, n_starts: int = 64
):
    """Signed count of solutions of grad f = y in the box around u."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    box = box_around(u, box_radius)
    pts = lattice_points(box, resolution).reshape(-1, m.n)
    res = np.linalg.norm(np.asarray(m.gradient(pts), dtype=float) - y, axis=-1)
    order = np.argsort(res)[:n_starts]

    def gradfn(z):
        return np.asarray(m.gradient(z), dtype=float) - y

    roots = []
    for idx in order:
        z, ok = _newton_root(gradfn, pts[idx], step_cap=0.5 * box_radius)
        if not ok:
            continue
        if np.any(z <= np.asarray(box.lo)) or np.any(z >= np.asarray(box.hi)):
            continue
        if any(np.linalg.norm(z - r) < 1e-6 * (1 + np.linalg.norm(z)) for r in roots):
            continue
        roots.append(z)

    total = 0
    for z in roots:
        jac = _fd_jacobian(gradfn, z, gradfn(z))
        det = float(np.linalg.det(jac))
        if abs(det) < 1e-12 * max(1.0, float(np.abs(jac).max()) ** m.n):
            raise RuntimeError(
                f"value {y} is not regular for {m.name}: singular Jacobian at {z}"
            )
        total += 1 if det > 0 else -1
    return total, roots


def brouwer_index(
    m: ModelFunctional,
    u,
    box_radius: float = 0.5,
    seed: int = 0,
    resolution: int = 16,
    details: dict | None = None,
) -> int:
    """Topological index of the gradient at an isolated zero.

    Two independent routes: the alternating sum of critical group ranks,
    and a signed preimage count of a small random regular value.  The
    preimage count is repeated at a second regular value and must agree
    with itself; disagreement with the alternating sum warns.
    """
    rng = np.random.default_rng(seed)
    u = np.atleast_1d(np.asarray(u, dtype=float))

    betti = critical_groups(m, u, box_radius, verify_isolation=False)
    ph_sum = betti.euler

    shell = u + 0.5 * box_radius * _unit_directions(rng, m.n, 32)
    gscale = float(
        np.median(np.linalg.norm(np.asarray(m.gradient(shell), dtype=float), axis=-1))
    )
    y_mag = 1e-2 * max(gscale, 1e-8)
    counts = []
    roots_seen = []
    for _ in range(2):
        y = y_mag * _unit_directions(rng, m.n, 1)[0]
        count, roots = _signed_preimage_count(m, u, box_radius, y, resolution)
        counts.append(count)
        roots_seen.append(roots)
    if counts[0] != counts[1]:
        raise RuntimeError(
            f"preimage count for {m.name} unstable across two regular values: "
            f"{counts[0]} vs {counts[1]}"
        )
    agrees = counts[0] == ph_sum
    if not agrees:
        warnings.warn(
            f"Brouwer index routes disagree on {m.name}: alternating sum {ph_sum}, "
            f"preimage count {counts[0]}",
            stacklevel=2,
        )
    if details is not None:
        details["poincare_hopf"] = int(ph_sum)
        details["preimage_counts"] = tuple(int(c) for c in counts)
        details["ranks"] = betti.ranks
        details["stable"] = bool(betti.stable)
        details["routes_agree"] = bool(agrees)
        details["n_preimages"] = len(roots_seen[0])
    return int(counts[0])


def _unit_directions(rng, n, count):
    d = rng.normal(size=(count, n))
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def verify_index_shift(
    m: ModelFunctional, u, box_radius: float = 0.5, seed: int = 0
) -> dict:
    """Check ind(grad f, lifted point) = (-1)^mu ind(grad phi, v)."""
    if m.split is None:
        raise ValueError("index shift check needs a split model")
    mr = model_reduction(m)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v_bar = u[: m.split[0]]
    z_bar = mr.lift(v_bar, mr.solve_psi(v_bar))
    df: dict = {}
    dp: dict = {}
    ind_full = brouwer_index(m, z_bar, box_radius, seed=seed, details=df)
    phi = reduced_functional(m)
    ind_reduced = brouwer_index(phi, v_bar, box_radius, seed=seed, details=dp)
    mu = m.mu
    holds = ind_full == (-1) ** mu * ind_reduced
    return {
        "model_id": m.name,
        "operation": "index_shift",
        "ind_full": int(ind_full),
        "ind_reduced": int(ind_reduced),
        "mu": int(mu),
        "holds": bool(holds),
        "full_routes": df,
        "reduced_routes": dp,
    }


# ---------------------------------------------------------------------------
# Morse inequalities


def _divide_by_one_plus_t(coeffs):
    """Write sum d_q t^q as (1+t) Q(t) + r t^N; returns (Q, r)."""
    q_prev = 0
    quotient = []
    for d in coeffs[:-1]:
        q_here = d - q_prev
        quotient.append(q_here)
        q_prev = q_here
    remainder = coeffs[-1] - q_prev if len(coeffs) else 0
    return tuple(int(q) for q in quotient), int(remainder)


def morse_inequality_check(
    m: ModelFunctional,
    box_radius: float = 2.0,
    alpha: float | None = None,
    seed: int = 0,
    resolutions: tuple = DEFAULT_RESOLUTIONS,
    points=None,
    n_starts: int = 96,
) -> dict:
    """Morse series against the series at infinity over a box.

    Critical points found by deflated multi-start search unless supplied;
    completeness is only "none missed after budget".  M(t) - beta(t) must
    factor as (1+t) Q(t) with nonnegative integer Q; a nonzero remainder
    or negative coefficient reports a violation (or a missed point).
    """
    if points is None:
        handle = SyntheticHandle(
            value=lambda z: float(m.value(np.asarray(z, dtype=float))),
            gradient=lambda z: np.asarray(m.gradient(np.asarray(z, dtype=float)), dtype=float),
            dim=m.n,
        )
        strategy = SearchStrategy(
            n_starts=n_starts,
            radii=(0.3 * box_radius, 0.7 * box_radius, 1.0 * box_radius),
            seed=seed,
        )
        result = find_critical_points(handle, strategy)
        points = [
            rec.point
            for rec in result.records
            if np.max(np.abs(rec.point)) < 0.999 * box_radius
        ]
    points = [np.atleast_1d(np.asarray(p, dtype=float)) for p in points]
    values = [float(m.value(p)) for p in points]

    local_radii = []
    for i, p in enumerate(points):
        dists = [np.linalg.norm(p - q) for j, q in enumerate(points) if j != i]
        r = 0.25 * box_radius
        if dists:
            r = min(r, 0.45 * min(dists))
        local_radii.append(r)

    M = np.zeros(m.n + 1, dtype=int)
    groups = []
    all_stable = True
    for p, r in zip(points, local_radii):
        b = critical_groups(m, p, box_radius=r, resolutions=resolutions)
        groups.append(b)
        all_stable = all_stable and b.stable
        M += np.array([b[q] for q in range(m.n + 1)], dtype=int)

    if alpha is None:
        base = min(values) if values else 0.0
        alpha = base - max(1.0, 0.5 * abs(base))
    beta = critical_groups_at_infinity(m, alpha, box_radius)
    all_stable = all_stable and beta.stable
    beta_arr = np.array([beta[q] for q in range(m.n + 1)], dtype=int)

    diff = M - beta_arr
    quotient, remainder = _divide_by_one_plus_t(list(diff))
    holds = remainder == 0 and all(q >= 0 for q in quotient)
    return {
        "model_id": m.name,
        "operation": "morse_inequalities",
        "M_poly": tuple(int(c) for c in M),
        "beta_poly": tuple(int(c) for c in beta_arr),
        "Q_coeffs": quotient,
        "remainder": int(remainder),
        "holds": bool(holds),
        "stable": bool(all_stable),
        "resolutions": tuple(resolutions),
        "alpha": float(alpha),
        "points": [p.tolist() for p in points],
        "critical_values": [float(v) for v in values],
        "groups": groups,
        "euler_M": int(sum((-1) ** q * c for q, c in enumerate(M))),
        "euler_beta": int(beta.euler),
    }


# ---------------------------------------------------------------------------
# report serialization


def _jsonify(obj):
    if isinstance(obj, BettiVector):
        return {"ranks": list(obj.ranks), "stable": bool(obj.stable)}
    if isinstance(obj, CheckReport):
        return {
            "name": obj.name,
            "holds": bool(obj.holds),
            "worst": _jsonify(obj.worst),
            "witness": _jsonify(obj.witness),
            "details": _jsonify(obj.details),
        }
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def report_to_json(report: dict, path) -> None:
    """Persist a verification report with a schema version stamp."""
    payload = {"schema_version": SCHEMA_VERSION}
    payload.update(_jsonify(report))
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
