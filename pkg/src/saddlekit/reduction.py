"""Saddle point reduction: fiber maximization and the reduced functional.

Given the orthogonal splitting X = X^- + X^+ with the monotonicity
condition holding on plus-fibers, the map psi(v) maximizes (A_minus
orientation) or minimizes (dual orientation) Phi(v + w) over w in X^+.
The reduced functional phi(v) = Phi(v + psi(v)) then has v as a critical
point exactly when v + psi(v) is critical for Phi, trading the full
strongly indefinite problem for one on the complementary block.

Everything here works in coefficient space: v and w are coordinates in
the H^1_0-orthonormal eigenbases of the split, where projections are
plain matrix products and norms are Euclidean.

The inner solver is a damped Newton iteration on the fiber gradient
with a finite-difference Jacobian while the fiber dimension stays
small, and Barzilai-Borwein descent with an Armijo safeguard beyond
that: strong concavity makes both globally convergent, and Newton is
the cheap choice exactly in the orientation where the fiber is the
finite side.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .functional import FunctionalHandle, phi_gradient, phi_value
from .grid import l2_inner
from .problem import CheckReport
from .spectral import A_MINUS_CASE, A_PLUS_CASE, SpectralSplit

INNER_TOL = 1e-10
INNER_MAX_ITER = 200
NEWTON_DIM_CAP = 64


# ---------------------------------------------------------------------------
# generic smooth minimization on R^n


def _fd_jacobian(grad: Callable, w: np.ndarray, g0: np.ndarray) -> np.ndarray:
    n = len(w)
    jac = np.empty((n, n))
    for j in range(n):
        h = 1e-6 * max(1.0, abs(w[j]))
        wp, wm = w.copy(), w.copy()
        wp[j] += h
        wm[j] -= h
        jac[:, j] = (grad(wp) - grad(wm)) / (2 * h)
    return 0.5 * (jac + jac.T)


def _minimize_smooth(
    value: Callable,
    grad: Callable,
    w0: np.ndarray,
    tol: float = INNER_TOL,
    max_iter: int = INNER_MAX_ITER,
    newton_cap: int = NEWTON_DIM_CAP,
) -> tuple[np.ndarray, float, int]:
    """Drive |grad| below tol; returns (w, residual, iterations).

    Raises RuntimeError with the last residual when max_iter is hit,
    which in the reduction context signals the concavity constant is
    likely violated along the path.
    """
    w = np.asarray(w0, dtype=float).copy()
    if w.size == 0:
        return w, 0.0, 0
    f = value(w)
    gr = grad(w)
    w_prev = None
    g_prev = None
    for it in range(max_iter):
        gn = float(np.linalg.norm(gr))
        if gn <= tol:
            return w, gn, it
        if len(w) <= newton_cap:
            jac = _fd_jacobian(grad, w, gr)
            try:
                step = np.linalg.solve(jac, -gr)
            except np.linalg.LinAlgError:
                step = -gr
            if gr @ step >= 0:  # not a descent direction, fall back
                step = -gr
        else:
            if w_prev is None:
                alpha = 1.0 / max(1.0, gn)
            else:
                s = w - w_prev
                y = gr - g_prev
                sy = s @ y
                alpha = (s @ s) / sy if sy > 0 else 1.0 / max(1.0, gn)
                alpha = float(np.clip(alpha, 1e-10, 1e10))
            step = -alpha * gr
        slope = gr @ step
        w_prev, g_prev = w, gr
        noise = 64 * np.finfo(float).eps * (1.0 + abs(f))
        accepted = False
        if -slope > noise:
            # predicted decrease resolvable in the value: Armijo backtracking
            t = 1.0
            while t > 1e-14:
                cand = w + t * step
                if value(cand) <= f + 1e-4 * t * slope:
                    accepted = True
                    break
                t *= 0.5
        if accepted:
            w = cand
            f = value(w)
            gr = grad(w)
            continue
        # value comparisons drowned in rounding: backtrack on the residual,
        # which stays meaningful down to the tolerance
        t = 1.0
        while True:
            cand = w + t * step
            g_cand = grad(cand)
            if np.linalg.norm(g_cand) <= (1 - 1e-4 * t) * gn or t <= 1e-14:
                break
            t *= 0.5
        w = cand
        f = value(w)
        gr = g_cand
    gn = float(np.linalg.norm(gr))
    if gn <= tol:
        return w, gn, max_iter
    raise RuntimeError(
        f"inner solver hit {max_iter} iterations, residual {gn:.3e}: "
        "fiber concavity constant likely violated along the path"
    )


# ---------------------------------------------------------------------------
# PDE reduction handle


@dataclass
class ReductionHandle:
    """Reduction state: functional, split, and the fiber solver settings.

    psi_cache holds the most recent (v, psi(v)) coefficient pair; the
    outer search visits nearby v, and continuity of psi makes the last
    solution an effective warm start.  Solves are deterministic given
    (v, warm start).  The handle is not safe for concurrent mutation;
    use one per thread.
    """

    functional: FunctionalHandle
    split: SpectralSplit
    kappa: float
    inner_tol: float = INNER_TOL
    inner_max_iter: int = INNER_MAX_ITER
    proj_minus: np.ndarray = field(default=None, repr=False)
    proj_plus: np.ndarray = field(default=None, repr=False)
    psi_cache: tuple | None = field(default=None, repr=False)

    @property
    def n_minus(self) -> int:
        return self.split.minus_basis.shape[1]

    @property
    def mu(self) -> int:
        return self.split.mu


def build_reduction(
    h: FunctionalHandle,
    split: SpectralSplit,
    kappa: float,
    inner_tol: float = INNER_TOL,
    inner_max_iter: int = INNER_MAX_ITER,
) -> ReductionHandle:
    if kappa <= 0:
        raise ValueError(f"monotonicity constant must be positive, got {kappa}")
    wq = h.grid.quad_weight
    # coefficient projections: c_i = wq e_i^T L z, assembled once
    n = h.grid.n_nodes

    def project_rows(basis):
        out = np.empty_like(basis)
        out[:n] = h.lap @ basis[:n]
        out[n:] = h.lap @ basis[n:]
        return wq * out.T

    return ReductionHandle(
        functional=h,
        split=split,
        kappa=float(kappa),
        inner_tol=inner_tol,
        inner_max_iter=inner_max_iter,
        proj_minus=project_rows(split.minus_basis),
        proj_plus=project_rows(split.plus_basis),
    )


def full_point(r: ReductionHandle, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    return r.split.minus_basis @ v + r.split.plus_basis @ w


def _fiber_sign(side: str) -> float:
    # A_minus maximizes over the plus fiber, the dual case minimizes
    return -1.0 if side == A_MINUS_CASE else 1.0


def solve_psi(r: ReductionHandle, v: np.ndarray) -> np.ndarray:
    """Coefficients of the fiber-stationary point over v.

    Stationarity: the plus-projection of grad Phi at v + psi(v)
    vanishes to inner_tol in the H^1_0 norm (Euclidean in coefficients).
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (r.n_minus,):
        raise ValueError(f"expected {r.n_minus} minus-coefficients, got {v.shape}")
    if r.mu == 0:
        return np.zeros(0)
    sign = _fiber_sign(r.split.side)
    base = r.split.minus_basis @ v

    def value(w):
        return sign * phi_value(r.functional, base + r.split.plus_basis @ w)

    def grad(w):
        full = phi_gradient(r.functional, base + r.split.plus_basis @ w)
        return sign * (r.proj_plus @ full)

    w0 = r.psi_cache[1] if r.psi_cache is not None else np.zeros(r.mu)
    w, _, _ = _minimize_smooth(
        value, grad, w0, tol=r.inner_tol, max_iter=r.inner_max_iter
    )
    r.psi_cache = (v.copy(), w.copy())
    return w


def reduced_value(r: ReductionHandle, v: np.ndarray) -> float:
    return phi_value(r.functional, full_point(r, v, solve_psi(r, v)))


def reduced_gradient(r: ReductionHandle, v: np.ndarray) -> np.ndarray:
    return reduced_value_and_gradient(r, v)[1]


def reduced_value_and_gradient(r: ReductionHandle, v: np.ndarray):
    """One fiber solve serving both outputs.

    The gradient of phi is the minus-projection of grad Phi at the
    fiber optimum: the plus-component vanishes there by stationarity,
    so no psi-derivative term appears.
    """
    w = solve_psi(r, v)
    z = full_point(r, v, w)
    val = phi_value(r.functional, z)
    grad = r.proj_minus @ phi_gradient(r.functional, z)
    return val, grad


# ---------------------------------------------------------------------------
# condition verification


def condition_triples(
    split: SpectralSplit,
    rng: np.random.Generator,
    n_triples: int = 200,
    radii: tuple = (0.1, 1.0, 10.0, 100.0),
) -> list:
    """Random (v, w1, w2) coefficient triples at several scales."""
    out = []
    nm, mu = split.minus_basis.shape[1], split.mu
    for i in range(n_triples):
        rad = radii[i % len(radii)]
        v = rng.normal(size=nm)
        v *= rad / max(np.linalg.norm(v), 1e-30)
        w1 = rng.normal(size=mu) * rad
        w2 = rng.normal(size=mu) * rad
        out.append((v, w1, w2))
    return out


def _condition_ratios(grad_fn, lift_fn, inner_fn, triples, side):
    sign = 1.0 if side == A_PLUS_CASE else -1.0
    ratios = []
    for v, w1, w2 in triples:
        dw = w1 - w2
        denom = float(dw @ dw)
        if denom == 0:
            continue
        g1 = grad_fn(lift_fn(v, w1))
        g2 = grad_fn(lift_fn(v, w2))
        ratios.append(sign * inner_fn(g1 - g2, dw) / denom)
    return np.array(ratios)


def verify_condition(
    h: FunctionalHandle,
    split: SpectralSplit,
    side: str,
    triples: list,
) -> CheckReport:
    """Sample the fiber monotonicity condition; kappa_est is the worst ratio."""
    wq = h.grid.quad_weight
    n = h.grid.n_nodes

    def project_plus(z):
        out = np.empty_like(z)
        out[:n] = h.lap @ z[:n]
        out[n:] = h.lap @ z[n:]
        return wq * (split.plus_basis.T @ out)

    ratios = _condition_ratios(
        grad_fn=lambda z: phi_gradient(h, z),
        lift_fn=lambda v, w: split.minus_basis @ v + split.plus_basis @ w,
        inner_fn=lambda gdiff, dw: float(project_plus(gdiff) @ dw),
        triples=triples,
        side=side,
    )
    kappa_est = float(ratios.min()) if ratios.size else float("inf")
    holds = kappa_est > 0
    witness = None
    if not holds and ratios.size:
        i = int(np.argmin(ratios))
        v, w1, w2 = triples[i]
        witness = {"v_norm": float(np.linalg.norm(v)), "ratio": kappa_est}
    return CheckReport(
        name="fiber_monotonicity",
        holds=holds,
        worst=kappa_est,
        witness=witness,
        details={"side": side, "kappa_est": kappa_est, "n_samples": len(triples)},
    )


# ---------------------------------------------------------------------------
# diagnostics


def coercivity_diagnostic(
    r: ReductionHandle,
    rng: np.random.Generator,
    ray_count: int = 8,
    radius_schedule: tuple = (1.0, 3.16, 10.0, 31.6, 100.0, 316.0, 1000.0),
    sublevel_cap: float = 10.0,
) -> CheckReport:
    """Growth of the restricted and reduced functionals along minus-rays.

    Reports (a) the per-radius minimum over rays of Phi restricted to
    X^- and of phi, with the radius beyond which the minima grow
    monotonically; (b) the non-vanishing floor: on sampled sublevel
    points, Lambda |v|_2^2 >= |v|^2 - 2 Phi_1(v), the quantitative form
    of "weak limits of normalized sublevel rays cannot vanish"; (c) a
    lower-bound estimate for inf phi.
    """
    h = r.functional
    g = h.grid
    dirs = rng.normal(size=(ray_count, r.n_minus))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.asarray(radius_schedule, dtype=float)
    phi1 = np.empty((ray_count, len(radii)))
    phi_red = np.empty((ray_count, len(radii)))
    proxy_margin = np.inf
    lam = h.model.lipschitz
    for i, d in enumerate(dirs):
        for j, rad in enumerate(radii):
            v = rad * d
            z_minus = r.split.minus_basis @ v
            p1 = phi_value(h, z_minus)
            phi1[i, j] = p1
            phi_red[i, j] = reduced_value(r, v)
            if p1 <= sublevel_cap:
                lhs = lam * l2_inner(g, z_minus, z_minus)
                rhs = rad * rad - 2.0 * p1
                proxy_margin = min(proxy_margin, (lhs - rhs) / (rad * rad))
    min1 = phi1.min(axis=0)
    minr = phi_red.min(axis=0)

    rises = np.diff(min1) > 0
    start = len(min1) - 1
    while start > 0 and rises[start - 1]:
        start -= 1
    monotone_from = float(radii[start]) if start < len(min1) - 1 else None
    proxy_ok = not np.isfinite(proxy_margin) or proxy_margin >= -1e-9
    holds = monotone_from is not None and proxy_ok
    return CheckReport(
        name="coercivity",
        holds=bool(holds),
        worst=float(minr.min()),
        witness=None,
        details={
            "radii": radii.tolist(),
            "min_phi1": min1.tolist(),
            "min_phi": minr.tolist(),
            "monotone_from_radius": monotone_from,
            "nonvanishing_margin": float(proxy_margin) if np.isfinite(proxy_margin) else None,
            "inf_phi_estimate": float(minr.min()),
        },
    )


def diagnostic_to_csv(report: CheckReport, path) -> None:
    """Radius vs minimum curves for plotting."""
    d = report.details
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["radius", "min_phi1", "min_phi"])
        for row in zip(d["radii"], d["min_phi1"], d["min_phi"]):
            writer.writerow([f"{x:.12e}" for x in row])


def psi_lipschitz_report(
    r: ReductionHandle,
    rng: np.random.Generator,
    n_pairs: int = 32,
    radius: float = 5.0,
) -> CheckReport:
    """Observed continuity modulus of psi on random pairs.

    Observational only: no modulus is certified, the report simply
    records the largest sampled ratio.
    """
    worst = 0.0
    for _ in range(n_pairs):
        v1 = rng.normal(size=r.n_minus) * radius
        v2 = v1 + rng.normal(size=r.n_minus) * (0.1 * radius)
        dv = float(np.linalg.norm(v1 - v2))
        if dv == 0:
            continue
        w1 = solve_psi(r, v1)
        w2 = solve_psi(r, v2)
        worst = max(worst, float(np.linalg.norm(w1 - w2)) / dv)
    return CheckReport(
        name="psi_continuity",
        holds=bool(np.isfinite(worst)),
        worst=worst,
        witness=None,
        details={"observed_lipschitz": worst, "radius": radius},
    )


# ---------------------------------------------------------------------------
# finite-dimensional analog for closed-form battery models


@dataclass
class ModelReduction:
    """Reduction of an explicit function on R^n with a coordinate split.

    The first n_minus coordinates form the v-block, the rest the fiber.
    Mirrors the PDE handle so closed-form saddle models run through the
    identical inner machinery.
    """

    value: Callable
    gradient: Callable
    n_dim: int
    n_minus: int
    side: str = A_MINUS_CASE
    inner_tol: float = INNER_TOL
    inner_max_iter: int = INNER_MAX_ITER
    psi_cache: tuple | None = field(default=None, repr=False)

    @property
    def mu(self) -> int:
        return self.n_dim - self.n_minus

    def lift(self, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        return np.concatenate([np.atleast_1d(v), np.atleast_1d(w)])

    def solve_psi(self, v: np.ndarray) -> np.ndarray:
        v = np.atleast_1d(np.asarray(v, dtype=float))
        if self.mu == 0:
            return np.zeros(0)
        sign = _fiber_sign(self.side)

        def val(w):
            return sign * self.value(self.lift(v, w))

        def grad(w):
            return sign * self.gradient(self.lift(v, w))[self.n_minus :]

        w0 = self.psi_cache[1] if self.psi_cache is not None else np.zeros(self.mu)
        w, _, _ = self._solve(val, grad, w0)
        self.psi_cache = (v.copy(), w.copy())
        return w

    def _solve(self, val, grad, w0):
        return _minimize_smooth(
            val, grad, w0, tol=self.inner_tol, max_iter=self.inner_max_iter
        )

    def reduced_value(self, v: np.ndarray) -> float:
        return float(self.value(self.lift(v, self.solve_psi(v))))

    def reduced_gradient(self, v: np.ndarray) -> np.ndarray:
        z = self.lift(v, self.solve_psi(v))
        return self.gradient(z)[: self.n_minus]

    def verify_condition(self, triples: list) -> CheckReport:
        ratios = _condition_ratios(
            grad_fn=lambda z: self.gradient(z)[self.n_minus :],
            lift_fn=self.lift,
            inner_fn=lambda gdiff, dw: float(gdiff @ dw),
            triples=triples,
            side=self.side,
        )
        kappa_est = float(ratios.min()) if ratios.size else float("inf")
        return CheckReport(
            name="fiber_monotonicity",
            holds=kappa_est > 0,
            worst=kappa_est,
            witness=None,
            details={"side": self.side, "kappa_est": kappa_est},
        )
