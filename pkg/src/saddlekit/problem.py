"""Nonlinearity families and sampling-based hypothesis checks.

A NonlinearityModel packages the energy density F(x, z), its z-gradient
and z-Hessian, the linearizations at the origin and at infinity, the
monotonicity bound used by the reduction, and the claimed growth and
sign tags.  Checkers verify each analytic hypothesis on large seeded
sample sets and report worst cases with witnesses instead of raising:
universally quantified conditions on a black-box F can only be probed,
never proved, so every check returns a report.

Built-in families are constructed so their hypotheses hold with margins
that are computed numerically (curvature infima on dense scalar grids)
rather than asserted.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import expressions as ex
from .fields import (
    MatrixField,
    assert_spd_on_grid,
    constant_field,
    diagonal_field,
    matrix_order_compare,
    scaled_field,
    sym22_eigenvalues,
)
from .grid import GridDomain, laplacian, laplacian_eigenvalues_1d
from .spectral import (
    A_MINUS_CASE,
    SpectralSplit,
    Spectrum,
    mass_matrix,
    resonant_index,
    solve_weighted_eigenproblem,
)

SIGN_TAGS = ("plus", "minus", "none")


@dataclass(frozen=True)
class NonlinearityModel:
    """Energy density with its linearizations and claimed hypotheses.

    value/gradient/hessian take aligned arrays: points (S, dim) and
    z (S, 2), returning (S,), (S, 2), (S, 2, 2).  origin_correction and
    infinity_correction, when set, evaluate F - (1/2) A0 z.z and
    F - (1/2) Ainf z.z in closed form to avoid cancellation near the
    regimes where those differences are tiny relative to the terms.
    """

    name: str
    value: Callable
    gradient: Callable
    hessian: Callable
    lipschitz: float
    a_zero: MatrixField
    a_infinity: MatrixField
    beta: MatrixField
    delta0: float
    origin_sign: str
    infinity_sign: str
    k: int = 0
    m: int = 0
    origin_correction: Callable | None = None
    infinity_correction: Callable | None = None
    description: str = ""


@dataclass(frozen=True)
class SampleSet:
    """Aligned (x, z) evaluation pairs with the radius of each z."""

    points: np.ndarray
    z: np.ndarray
    radius: np.ndarray


@dataclass(frozen=True)
class PairSampleSet:
    """Aligned (x, z1, z2) triples for difference-quotient conditions."""

    points: np.ndarray
    z1: np.ndarray
    z2: np.ndarray


@dataclass(frozen=True)
class CheckReport:
    name: str
    holds: bool
    worst: float
    witness: dict | None
    details: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# samplers


def _cross(g: GridDomain, radii: np.ndarray, dirs: np.ndarray, node_stride: int):
    nodes = g.nodes[::node_stride]
    z = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, 2)
    s = len(z)
    points = np.repeat(nodes, s, axis=0)
    z_full = np.tile(z, (len(nodes), 1))
    radius = np.tile(np.repeat(radii, len(dirs)), len(nodes))
    return SampleSet(points=points, z=z_full, radius=radius)


def _unit_directions(rng: np.random.Generator, n: int) -> np.ndarray:
    d = rng.normal(size=(n, 2))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def growth_samples(
    g: GridDomain,
    rng: np.random.Generator,
    n_radii: int = 64,
    n_directions: int = 32,
    r_min: float = 1e-4,
    r_max: float = 1e6,
    node_stride: int = 1,
) -> SampleSet:
    radii = np.geomspace(r_min, r_max, n_radii)
    return _cross(g, radii, _unit_directions(rng, n_directions), node_stride)


def origin_samples(
    g: GridDomain,
    rng: np.random.Generator,
    delta0: float,
    n_radii: int = 64,
    n_directions: int = 32,
    node_stride: int = 1,
) -> SampleSet:
    radii = np.geomspace(1e-4 * delta0, delta0, n_radii)
    return _cross(g, radii, _unit_directions(rng, n_directions), node_stride)


def infinity_samples(
    g: GridDomain,
    rng: np.random.Generator,
    n_radii: int = 64,
    n_directions: int = 32,
    r_max: float = 1e6,
    node_stride: int = 1,
) -> SampleSet:
    radii = np.geomspace(1.0, r_max, n_radii)
    return _cross(g, radii, _unit_directions(rng, n_directions), node_stride)


def pair_samples(
    g: GridDomain,
    rng: np.random.Generator,
    n_pairs: int = 4096,
    r_max: float = 1e3,
    node_stride: int = 1,
) -> PairSampleSet:
    """Difference-quotient triples: half far apart, half nearly coincident.

    Close pairs probe the local Hessian bound, far pairs the global
    secant bound.
    """
    nodes = g.nodes[::node_stride]
    idx = rng.integers(0, len(nodes), size=n_pairs)
    points = nodes[idx]
    r1 = np.exp(rng.uniform(np.log(1e-3), np.log(r_max), size=n_pairs))
    z1 = r1[:, None] * _unit_directions(rng, n_pairs)
    far = r_max * np.exp(rng.uniform(np.log(1e-6), 0.0, size=n_pairs))
    step = np.where(np.arange(n_pairs) % 2 == 0, far, 1e-4 * np.maximum(r1, 1.0))
    z2 = z1 + step[:, None] * _unit_directions(rng, n_pairs)
    return PairSampleSet(points=points, z1=z1, z2=z2)


# ---------------------------------------------------------------------------
# hypothesis checks


def _witness(samples: SampleSet, i: int, **extra) -> dict:
    w = {
        "x": samples.points[i].tolist(),
        "z": samples.z[i].tolist(),
        "radius": float(samples.radius[i]),
    }
    w.update(extra)
    return w


def check_linear_growth(model: NonlinearityModel, samples: SampleSet) -> CheckReport:
    """Probe |gradF(x, z)| <= Lambda |z| over the sample set."""
    grad = model.gradient(samples.points, samples.z)
    norms = np.linalg.norm(grad, axis=1)
    ratio = norms / samples.radius
    i = int(np.argmax(ratio))
    worst = float(ratio[i])
    holds = worst <= model.lipschitz * (1.0 + 1e-9)
    witness = None if holds else _witness(samples, i, ratio=worst)
    return CheckReport(
        name="linear_growth",
        holds=holds,
        worst=worst,
        witness=witness,
        details={"lipschitz": model.lipschitz},
    )


def _origin_deviation(model: NonlinearityModel, samples: SampleSet) -> np.ndarray:
    if model.origin_correction is not None:
        return model.origin_correction(samples.points, samples.z)
    quad = 0.5 * np.einsum(
        "sij,si,sj->s", model.a_zero(samples.points), samples.z, samples.z
    )
    return model.value(samples.points, samples.z) - quad


def check_origin_sign(model: NonlinearityModel, samples: SampleSet) -> CheckReport:
    """Probe the sign of G = F - (1/2) A0 z.z on 0 < |z| <= delta0.

    Also bins |G| / |z|^2 by radius shell: the shell ratios must decay
    toward zero at small radius for G to be a genuine o(|z|^2)
    correction.  The decay statistic takes the max over nodes at each
    shell, the sampling surrogate for x-uniformity.
    """
    dev = _origin_deviation(model, samples)
    if model.origin_sign == "minus":
        signed = -dev
    else:
        signed = dev
    i = int(np.argmin(signed))
    worst = float(signed[i])
    holds = model.origin_sign in ("plus", "minus") and worst > 0.0

    radii = samples.radius
    shells, inv = np.unique(np.round(np.log(radii), 9), return_inverse=True)
    ratios = np.zeros(len(shells))
    np.maximum.at(ratios, inv, np.abs(dev) / radii**2)
    is_small_o = bool(ratios[0] <= 1e-3 * ratios.max()) if ratios.max() > 0 else True
    witness = None if holds else _witness(samples, i, deviation=float(dev[i]))
    return CheckReport(
        name="origin_sign",
        holds=holds,
        worst=worst,
        witness=witness,
        details={
            "sign": model.origin_sign,
            "delta0": model.delta0,
            "is_small_o": is_small_o,
            "decay_ratios": ratios.tolist(),
        },
    )


def _infinity_deviation(model: NonlinearityModel, samples: SampleSet) -> np.ndarray:
    if model.infinity_correction is not None:
        return model.infinity_correction(samples.points, samples.z)
    quad = 0.5 * np.einsum(
        "sij,si,sj->s", model.a_infinity(samples.points), samples.z, samples.z
    )
    return model.value(samples.points, samples.z) - quad


def check_infinity_sign(
    model: NonlinearityModel, samples: SampleSet, min_divergence: float = 2.0
) -> CheckReport:
    """Probe H = F - (1/2) Ainf z.z for monotone divergence to +-inf.

    Aggregates H over each radius shell (max for the minus case, min for
    the plus case: the slowest direction and node governs).  Holds iff
    beyond some shell the aggregate moves monotonically the right way
    and travels at least min_divergence.  For the minus case also
    reports M = sup H, the global upper bound.
    """
    h = _infinity_deviation(model, samples)
    radii_unique, inv = np.unique(np.round(np.log(samples.radius), 9), return_inverse=True)
    n_shell = len(radii_unique)
    if model.infinity_sign == "minus":
        agg = np.full(n_shell, -np.inf)
        np.maximum.at(agg, inv, h)
        trend = agg
    elif model.infinity_sign == "plus":
        agg = np.full(n_shell, np.inf)
        np.minimum.at(agg, inv, h)
        trend = -agg
    else:
        return CheckReport(
            name="infinity_sign",
            holds=False,
            worst=0.0,
            witness=None,
            details={"sign": "none"},
        )

    # smallest shell index from which the aggregate is strictly monotone
    drops = np.diff(trend) < 0
    start = n_shell - 1
    while start > 0 and drops[start - 1]:
        start -= 1
    travelled = float(trend[start] - trend[-1])
    holds = start < n_shell - 1 and travelled >= min_divergence
    shell_radii = np.exp(radii_unique)
    div_radius = float(shell_radii[start]) if holds else None

    oscillating = (not holds) and float(np.ptp(trend)) < 10.0 * min_divergence
    details = {
        "sign": model.infinity_sign,
        "divergence_radius": div_radius,
        "shell_values": agg.tolist(),
        "shell_radii": shell_radii.tolist(),
        "travelled": travelled,
        "oscillating_or_bounded": oscillating,
    }
    if model.infinity_sign == "minus":
        details["upper_bound_M"] = float(max(h.max(), 0.0))
    worst = float(agg[-1])
    return CheckReport(
        name="infinity_sign", holds=bool(holds), worst=worst, witness=None, details=details
    )


def check_reduction_condition(
    model: NonlinearityModel,
    side: str,
    samples: PairSampleSet,
    g: GridDomain,
    spectrum: Spectrum | None = None,
) -> CheckReport:
    """Probe the monotonicity bound of the reduction on secant samples.

    A_minus_case: (gradF(x,z1) - gradF(x,z2)).d >= beta(x) d.d with
    d = z1 - z2, and beta must dominate lambda_{k-1} Ainf in the
    pointwise order.  A_plus_case reverses both inequalities against
    lambda_{k+1} Ainf.  margin is the worst slack per unit |d|^2.
    """
    if side not in (A_MINUS_CASE, "A_plus_case"):
        raise ValueError(f"unknown side {side!r}")
    d = samples.z1 - samples.z2
    dd = np.einsum("si,si->s", d, d)
    keep = dd > 0
    d, dd = d[keep], dd[keep]
    pts = samples.points[keep]
    gdiff = model.gradient(pts, samples.z1[keep]) - model.gradient(
        pts, samples.z2[keep]
    )
    secant = np.einsum("si,si->s", gdiff, d)
    bound = np.einsum("sij,si,sj->s", model.beta(pts), d, d)
    slack = (secant - bound) / dd if side == A_MINUS_CASE else (bound - secant) / dd
    i = int(np.argmin(slack))
    margin = float(slack[i])
    pointwise_ok = margin >= -1e-9

    order_tag = "not_checked"
    order_ok = True
    if spectrum is not None:
        if side == A_MINUS_CASE:
            if model.k >= 2:
                lam = float(spectrum.distinct_eigenvalues[model.k - 2])
                order_tag = matrix_order_compare(
                    scaled_field(model.a_infinity, lam), model.beta, g
                )
                order_ok = order_tag in ("leq", "strict_preceq")
            else:
                order_tag = "vacuous"
        else:
            if model.k + 1 <= spectrum.n_distinct:
                lam = float(spectrum.distinct_eigenvalues[model.k])
                order_tag = matrix_order_compare(
                    model.beta, scaled_field(model.a_infinity, lam), g
                )
                order_ok = order_tag in ("leq", "strict_preceq")
            else:
                order_tag = "vacuous"

    witness = None
    if not pointwise_ok:
        witness = {
            "x": pts[i].tolist(),
            "z1": samples.z1[keep][i].tolist(),
            "z2": samples.z2[keep][i].tolist(),
            "slack": margin,
        }
    return CheckReport(
        name="reduction_condition",
        holds=bool(pointwise_ok and order_ok),
        worst=margin,
        witness=witness,
        details={"side": side, "order_tag": order_tag},
    )


def spectral_gap_delta(
    beta: MatrixField, split: SpectralSplit, g: GridDomain
) -> float:
    """Smallest value of (-|z|^2 + integral beta z.z) / |z|^2 on the plus side.

    Positive exactly when the projected quadratic form dominates the
    identity, the coercivity margin of the fiber maximization.  An empty
    plus side makes the condition vacuous: +inf.
    """
    if split.side != A_MINUS_CASE:
        raise ValueError("spectral gap is defined for the A_minus_case split")
    if split.mu == 0:
        return float("inf")
    mb = mass_matrix(g, beta)
    b = g.quad_weight * split.plus_basis.T @ mb @ split.plus_basis
    b = 0.5 * (b + b.T)
    delta = float(np.linalg.eigvalsh(b - np.eye(split.mu)).min())
    if delta <= 0:
        warnings.warn(
            f"fiber coercivity margin is nonpositive: {delta:.3e}", stacklevel=2
        )
    return delta


def verify_gradient_consistency(
    model: NonlinearityModel,
    samples: SampleSet,
    eps: float = 1e-5,
    rel_tol: float = 1e-6,
    max_samples: int = 512,
) -> CheckReport:
    """Central-difference check of gradient against value."""
    pts = samples.points[:max_samples]
    z = samples.z[:max_samples]
    grad = model.gradient(pts, z)
    fd = np.empty_like(grad)
    for j in range(2):
        h = eps * np.maximum(1.0, np.abs(z[:, j]))
        zp, zm = z.copy(), z.copy()
        zp[:, j] += h
        zm[:, j] -= h
        fd[:, j] = (model.value(pts, zp) - model.value(pts, zm)) / (2 * h)
    scale = np.maximum(np.linalg.norm(grad, axis=1), 1.0)
    err = np.linalg.norm(grad - fd, axis=1) / scale
    i = int(np.argmax(err))
    worst = float(err[i])
    holds = worst <= rel_tol
    return CheckReport(
        name="gradient_consistency",
        holds=holds,
        worst=worst,
        witness=None if holds else {"x": pts[i].tolist(), "z": z[i].tolist()},
        details={"eps": eps},
    )


def validate_model(model: NonlinearityModel, g: GridDomain) -> None:
    """Construction-time invariants: F and gradF vanish at z = 0."""
    zeros = np.zeros((g.n_nodes, 2))
    f0 = model.value(g.nodes, zeros)
    g0 = model.gradient(g.nodes, zeros)
    if np.abs(f0).max(initial=0.0) > 1e-12:
        raise ValueError(f"{model.name}: F(x, 0) must vanish, max {np.abs(f0).max()}")
    if np.abs(g0).max(initial=0.0) > 1e-12:
        raise ValueError(f"{model.name}: gradF(x, 0) must vanish")
    if model.origin_sign not in SIGN_TAGS or model.infinity_sign not in SIGN_TAGS:
        raise ValueError(f"{model.name}: bad sign tags")
    for fld in (model.a_zero, model.a_infinity):
        assert_spd_on_grid(fld, g)


# ---------------------------------------------------------------------------
# scalar profile helpers for the built-in families


def _curvature_grid() -> np.ndarray:
    t = np.geomspace(1e-8, 1e12, 4001)
    return np.concatenate([[0.0], t])


def _scan_sign_radius(values: np.ndarray, radii: np.ndarray) -> float:
    """Largest r such that values > 0 on (0, r]; radii ascending."""
    bad = np.flatnonzero(values <= 0.0)
    if bad.size == 0:
        return float(radii[-1])
    if bad[0] == 0:
        return 0.0
    return 0.9 * float(radii[bad[0] - 1])


def _scalar_eigs(g: GridDomain) -> np.ndarray:
    if g.dim == 1:
        return laplacian_eigenvalues_1d(g)
    return np.linalg.eigvalsh(laplacian(g).toarray())


def _resonance_scan(g: GridDomain, fld: MatrixField, limit: float = 1.5):
    """Spectrum of the pencil up to eigenvalue `limit`; resonant index or 0."""
    n2 = 2 * g.n_nodes
    count = min(n2, 16)
    while True:
        s = solve_weighted_eigenproblem(g, fld, count)
        if s.distinct_eigenvalues[-1] > limit or count == n2:
            break
        count = min(n2, 2 * count)
    idx = resonant_index(s)
    return s, (idx or 0)


# ---------------------------------------------------------------------------
# built-in families


def radial_log_model(
    g: GridDomain,
    k: int = 2,
    log_coeff: float = -5.0,
    quartic_coeff: float = 0.0,
    base: MatrixField | None = None,
) -> NonlinearityModel:
    """Radial family: F = (1/2) Ainf z.z + c ln(1+|z|^2) + q |z|^4/(1+|z|^4).

    Ainf is the base field rescaled so its k-th distinct eigenvalue of
    the weighted pencil equals 1.  c < 0 drives the infinity deviation
    to -inf (minus tag), c > 0 to +inf.  The sign at the origin follows
    the leading quartic coefficient q - c/2.  The monotonicity bound
    beta and the growth constant come from curvature extrema of the
    radial profile on a dense grid.
    """
    from .spectral import normalize_resonance

    c, q = float(log_coeff), float(quartic_coeff)
    base = base if base is not None else constant_field(np.eye(2), label="Ainf")
    a_inf = MatrixField(
        normalize_resonance(base, k, g).evaluator, "Ainf", "resonance-normalized base"
    )

    # radial profile g(t), t = |z|^2: curvatures 2g' (tangent), 2g'+4tg'' (radial)
    t = _curvature_grid()
    gp = c / (1 + t) + q * 2 * t / (1 + t**2) ** 2
    gpp = -c / (1 + t) ** 2 + q * 2 * (1 - 3 * t**2) / (1 + t**2) ** 3
    curv = np.concatenate([2 * gp, 2 * gp + 4 * t * gpp])
    hess_lo, hess_hi = float(curv.min()), float(curv.max())

    a_zero = MatrixField(
        lambda pts, _a=a_inf, _s=2 * c: _a(pts) + _s * np.eye(2),
        "A0",
        "Ainf + 2c I",
    )
    beta = MatrixField(
        lambda pts, _a=a_inf, _s=hess_lo: _a(pts) + _s * np.eye(2),
        "beta",
        "Ainf + (inf Hess correction) I",
    )
    lam_max = sym22_eigenvalues(a_inf(g.nodes))[:, 1].max()
    lipschitz = float(lam_max + max(abs(hess_lo), abs(hess_hi)))

    def correction(z):
        tt = np.einsum("si,si->s", z, z)
        return c * np.log1p(tt) + q * tt**2 / (1 + tt**2)

    def value(pts, z):
        quad = 0.5 * np.einsum("sij,si,sj->s", a_inf(pts), z, z)
        return quad + correction(z)

    def gradient(pts, z):
        tt = np.einsum("si,si->s", z, z)
        gp_s = c / (1 + tt) + q * 2 * tt / (1 + tt**2) ** 2
        return np.einsum("sij,sj->si", a_inf(pts), z) + 2 * gp_s[:, None] * z

    def hessian(pts, z):
        tt = np.einsum("si,si->s", z, z)
        gp_s = c / (1 + tt) + q * 2 * tt / (1 + tt**2) ** 2
        gpp_s = -c / (1 + tt) ** 2 + q * 2 * (1 - 3 * tt**2) / (1 + tt**2) ** 3
        eye = np.broadcast_to(np.eye(2), (len(z), 2, 2))
        outer = np.einsum("si,sj->sij", z, z)
        return a_inf(pts) + 2 * gp_s[:, None, None] * eye + 4 * gpp_s[:, None, None] * outer

    def origin_correction(pts, z):
        # F - (1/2) A0 z.z = c (ln(1+t) - t) + q t^2/(1+t^2), t = |z|^2
        tt = np.einsum("si,si->s", z, z)
        return c * (np.log1p(tt) - tt) + q * tt**2 / (1 + tt**2)

    def infinity_correction(pts, z):
        return correction(z)

    lead = q - 0.5 * c
    if lead > 0:
        origin_sign = "plus"
    elif lead < 0:
        origin_sign = "minus"
    else:
        origin_sign = "none"
    r = np.geomspace(1e-4, 10.0, 2000)
    dev = c * (np.log1p(r**2) - r**2) + q * r**4 / (1 + r**4)
    delta0 = _scan_sign_radius(dev if origin_sign == "plus" else -dev, r)
    infinity_sign = "minus" if c < 0 else ("plus" if c > 0 else "none")

    _, m = _resonance_scan(g, a_zero)
    model = NonlinearityModel(
        name="radial_log",
        value=value,
        gradient=gradient,
        hessian=hessian,
        lipschitz=lipschitz,
        a_zero=a_zero,
        a_infinity=a_inf,
        beta=beta,
        delta0=delta0,
        origin_sign=origin_sign,
        infinity_sign=infinity_sign,
        k=k,
        m=m,
        origin_correction=origin_correction,
        infinity_correction=infinity_correction,
        description=f"radial log family, c={c}, q={q}, k={k}",
    )
    validate_model(model, g)
    return model


def _aniso_profiles(a1, a2, c1, e1, pv, g2, eta):
    """Scalar component profiles and derivatives for the decoupled family."""

    def f1(u):
        return 0.5 * a1 * u**2 - c1 * np.log1p(u**4) + e1 * u**4 / (1 + u**4)

    def f1p(u):
        return a1 * u - c1 * 4 * u**3 / (1 + u**4) + e1 * 4 * u**3 / (1 + u**4) ** 2

    def f1pp(u):
        u4 = u**4
        return (
            a1
            - c1 * 4 * u**2 * (3 - u4) / (1 + u4) ** 2
            + e1 * 4 * u**2 * (3 - 5 * u4) / (1 + u4) ** 3
        )

    def f2(v):
        return 0.5 * a2 * v**2 + pv * v**2 / (1 + eta * v**2) - g2 * np.log1p(v**2)

    def f2p(v):
        return a2 * v + pv * 2 * v / (1 + eta * v**2) ** 2 - g2 * 2 * v / (1 + v**2)

    def f2pp(v):
        v2 = v**2
        return (
            a2
            + pv * 2 * (1 - 3 * eta * v2) / (1 + eta * v2) ** 3
            - g2 * 2 * (1 - v2) / (1 + v2) ** 2
        )

    return f1, f1p, f1pp, f2, f2p, f2pp


def aniso_resonant_model(
    g: GridDomain,
    k: int = 2,
    minor_ratio: float = 0.6,
    origin_gain: float = 0.8,
    log_u: float = 1.0,
    quartic_u: float = 2.0,
    log_v: float = 2.5,
    sat_v: float = 0.1,
) -> NonlinearityModel:
    """Decoupled family resonant both at infinity and at the origin.

    The first component carries the infinity resonance: its linear rate
    is the k-th scalar eigenvalue, and its corrections are quartic-flat
    at 0, so the origin linearization of that component is exactly
    resonant as well.  The second component sits off-resonance at
    infinity (rate minor_ratio * lambda_1) but gains origin_gain *
    lambda_1 of curvature at the origin, shifting the origin resonance
    position: the cumulative eigenvalue counts below 1 differ between
    the two pencils, which is what the multiplicity statement needs.

    Both corrections decay like -log at infinity (minus tag) and are
    positive quartics near the origin (plus tag).
    """
    lam = _scalar_eigs(g)
    if k < 2 or k > len(lam):
        raise ValueError(f"need 2 <= k <= {len(lam)} scalar modes, got {k}")
    a1 = float(lam[k - 1])
    a2 = minor_ratio * float(lam[0])
    c1, e1 = float(log_u), float(quartic_u)
    g2, eta = float(log_v), float(sat_v)
    pv = g2 + 0.5 * origin_gain * float(lam[0])
    if not eta < g2 / (2 * pv):
        raise ValueError(
            f"saturation {eta} too coarse for origin positivity: need < {g2 / (2 * pv):.4f}"
        )

    f1, f1p, f1pp, f2, f2p, f2pp = _aniso_profiles(a1, a2, c1, e1, pv, g2, eta)

    s = np.concatenate([[0.0], np.geomspace(1e-8, 1e8, 4001)])
    b1 = float(f1pp(s).min())
    b2 = float(f2pp(s).min())
    lipschitz = float(max(np.abs(f1pp(s)).max(), np.abs(f2pp(s)).max()))

    alpha2 = a2 + 2 * pv - 2 * g2
    a_infinity = diagonal_field(a1, a2, label="Ainf")
    a_zero = diagonal_field(a1, alpha2, label="A0")
    beta = diagonal_field(b1, b2, label="beta")

    def value(pts, z):
        return f1(z[:, 0]) + f2(z[:, 1])

    def gradient(pts, z):
        return np.stack([f1p(z[:, 0]), f2p(z[:, 1])], axis=1)

    def hessian(pts, z):
        out = np.zeros((len(z), 2, 2))
        out[:, 0, 0] = f1pp(z[:, 0])
        out[:, 1, 1] = f2pp(z[:, 1])
        return out

    def infinity_correction(pts, z):
        u, v = z[:, 0], z[:, 1]
        return (
            -c1 * np.log1p(u**4)
            + e1 * u**4 / (1 + u**4)
            + pv * v**2 / (1 + eta * v**2)
            - g2 * np.log1p(v**2)
        )

    def origin_correction(pts, z):
        u, v = z[:, 0], z[:, 1]
        gu = -c1 * np.log1p(u**4) + e1 * u**4 / (1 + u**4)
        gv = -pv * eta * v**4 / (1 + eta * v**2) + g2 * (v**2 - np.log1p(v**2))
        return gu + gv

    r = np.geomspace(1e-4, 10.0, 4000)
    gu = -c1 * np.log1p(r**4) + e1 * r**4 / (1 + r**4)
    gv = -pv * eta * r**4 / (1 + eta * r**2) + g2 * (r**2 - np.log1p(r**2))
    delta0 = min(_scan_sign_radius(gu, r), _scan_sign_radius(gv, r))

    s_inf, k_model = _resonance_scan(g, a_infinity)
    s_zero, m_model = _resonance_scan(g, a_zero)
    model = NonlinearityModel(
        name="aniso_resonant",
        value=value,
        gradient=gradient,
        hessian=hessian,
        lipschitz=lipschitz,
        a_zero=a_zero,
        a_infinity=a_infinity,
        beta=beta,
        delta0=delta0,
        origin_sign="plus",
        infinity_sign="minus",
        k=k_model,
        m=m_model,
        origin_correction=origin_correction,
        infinity_correction=infinity_correction,
        description=(
            f"decoupled doubly-resonant family: rates ({a1:.4f}, {a2:.4f}), "
            f"origin rates ({a1:.4f}, {alpha2:.4f})"
        ),
    )
    validate_model(model, g)
    return model


def quadratic_model(g: GridDomain, mat, k: int = 0) -> NonlinearityModel:
    """Pure quadratic F = (1/2) C z.z; every bound is tight with margin 0."""
    fld = constant_field(mat, label="Ainf")

    def value(pts, z):
        return 0.5 * np.einsum("sij,si,sj->s", fld(pts), z, z)

    def gradient(pts, z):
        return np.einsum("sij,sj->si", fld(pts), z)

    def hessian(pts, z):
        return fld(pts)

    lam = sym22_eigenvalues(fld(g.nodes))
    model = NonlinearityModel(
        name="quadratic",
        value=value,
        gradient=gradient,
        hessian=hessian,
        lipschitz=float(np.abs(lam).max()),
        a_zero=MatrixField(fld.evaluator, "A0", fld.description),
        a_infinity=fld,
        beta=MatrixField(fld.evaluator, "beta", fld.description),
        delta0=1.0,
        origin_sign="none",
        infinity_sign="none",
        k=k,
        m=k,
        origin_correction=lambda pts, z: np.zeros(len(z)),
        infinity_correction=lambda pts, z: np.zeros(len(z)),
        description="pure quadratic",
    )
    validate_model(model, g)
    return model


def expression_model(
    g: GridDomain,
    f_text: str,
    lipschitz: float,
    a_zero: MatrixField,
    a_infinity: MatrixField,
    beta: MatrixField,
    delta0: float = 1.0,
    origin_sign: str = "none",
    infinity_sign: str = "none",
) -> NonlinearityModel:
    """User-defined density from a grammar expression in x1, x2, u, v."""
    node = ex.constant_fold(ex.parse(f_text))
    du = ex.constant_fold(ex.differentiate(node, "u"))
    dv = ex.constant_fold(ex.differentiate(node, "v"))
    duu = ex.constant_fold(ex.differentiate(du, "u"))
    duv = ex.constant_fold(ex.differentiate(du, "v"))
    dvv = ex.constant_fold(ex.differentiate(dv, "v"))

    def env(pts, z):
        e = {"x1": pts[:, 0], "u": z[:, 0], "v": z[:, 1]}
        e["x2"] = pts[:, 1] if pts.shape[1] > 1 else np.zeros(len(pts))
        return e

    def value(pts, z):
        return np.broadcast_to(ex.evaluate(node, env(pts, z)), (len(z),)).astype(float)

    def gradient(pts, z):
        e = env(pts, z)
        shape = (len(z),)
        return np.stack(
            [
                np.broadcast_to(ex.evaluate(du, e), shape),
                np.broadcast_to(ex.evaluate(dv, e), shape),
            ],
            axis=1,
        ).astype(float)

    def hessian(pts, z):
        e = env(pts, z)
        shape = (len(z),)
        out = np.empty((len(z), 2, 2))
        out[:, 0, 0] = np.broadcast_to(ex.evaluate(duu, e), shape)
        out[:, 0, 1] = out[:, 1, 0] = np.broadcast_to(ex.evaluate(duv, e), shape)
        out[:, 1, 1] = np.broadcast_to(ex.evaluate(dvv, e), shape)
        return out

    _, k = _resonance_scan(g, a_infinity)
    _, m = _resonance_scan(g, a_zero)
    model = NonlinearityModel(
        name="expression",
        value=value,
        gradient=gradient,
        hessian=hessian,
        lipschitz=float(lipschitz),
        a_zero=a_zero,
        a_infinity=a_infinity,
        beta=beta,
        delta0=float(delta0),
        origin_sign=origin_sign,
        infinity_sign=infinity_sign,
        k=k,
        m=m,
        description=f"expression: {f_text}",
    )
    validate_model(model, g)
    return model


FAMILIES = {
    "radial_log": radial_log_model,
    "aniso_resonant": aniso_resonant_model,
    "quadratic": quadratic_model,
    "expression": expression_model,
}
