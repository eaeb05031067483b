"""Fiber solver, reduced functional, and monotonicity verification."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from saddlekit.functional import (
    build_functional,
    phi_gradient,
    phi_value,
    residual_norm,
)
from saddlekit.grid import build_grid
from saddlekit.problem import (
    aniso_resonant_model,
    quadratic_model,
    radial_log_model,
    spectral_gap_delta,
)
from saddlekit.reduction import (
    ModelReduction,
    build_reduction,
    coercivity_diagnostic,
    condition_triples,
    diagnostic_to_csv,
    full_point,
    psi_lipschitz_report,
    reduced_gradient,
    reduced_value,
    reduced_value_and_gradient,
    solve_psi,
    verify_condition,
)
from saddlekit.spectral import (
    A_MINUS_CASE,
    A_PLUS_CASE,
    build_split,
    solve_weighted_eigenproblem,
)


@pytest.fixture(scope="module")
def g():
    return build_grid((0.0, 1.0), 31)


@pytest.fixture(scope="module")
def radial_setup(g):
    model = radial_log_model(g, k=2, log_coeff=-5.0)
    s = solve_weighted_eigenproblem(g, model.a_infinity, count=2 * g.n_nodes)
    split = build_split(s, model.k, A_MINUS_CASE)
    h = build_functional(g, model)
    delta = spectral_gap_delta(model.beta, split, g)
    red = build_reduction(h, split, kappa=delta)
    return model, s, split, h, delta, red


@pytest.fixture(scope="module")
def aniso_setup():
    ga = build_grid((0.0, 1.0), 63)
    model = aniso_resonant_model(ga)
    s = solve_weighted_eigenproblem(ga, model.a_infinity, count=2 * ga.n_nodes)
    split = build_split(s, model.k, A_MINUS_CASE)
    h = build_functional(ga, model)
    delta = spectral_gap_delta(model.beta, split, ga)
    red = build_reduction(h, split, kappa=delta)
    return ga, model, split, h, delta, red


class TestClosedFormModels:
    """Explicit saddles where psi and phi have exact formulas."""

    @staticmethod
    def coupled(b):
        # f(v, w) = v^4/4 - w^2/2 + b v w, so psi(v) = b v exactly
        def value(z):
            return 0.25 * z[0] ** 4 - 0.5 * z[1] ** 2 + b * z[0] * z[1]

        def gradient(z):
            return np.array([z[0] ** 3 + b * z[1], -z[1] + b * z[0]])

        return ModelReduction(value=value, gradient=gradient, n_dim=2, n_minus=1)

    def test_psi_is_linear_in_v(self):
        mr = self.coupled(b=0.7)
        for v in (-2.0, -0.3, 0.0, 1.5):
            assert_allclose(mr.solve_psi([v]), [0.7 * v], atol=1e-9)

    def test_reduced_value_formula(self):
        mr = self.coupled(b=0.7)
        for v in (-1.2, 0.4, 3.0):
            expected = 0.25 * v**4 + 0.5 * 0.7**2 * v**2
            assert_allclose(mr.reduced_value([v]), expected, rtol=1e-9, atol=1e-12)

    def test_reduced_gradient_formula(self):
        mr = self.coupled(b=0.7)
        for v in (-1.2, 0.4, 3.0):
            expected = v**3 + 0.7**2 * v
            assert_allclose(mr.reduced_gradient([v]), [expected], rtol=1e-8, atol=1e-10)

    def test_quadratic_saddle_kappa_is_one(self):
        def value(z):
            return 0.5 * 3.0 * z[0] ** 2 - 0.5 * z[1] ** 2

        def gradient(z):
            return np.array([3.0 * z[0], -z[1]])

        mr = ModelReduction(value=value, gradient=gradient, n_dim=2, n_minus=1)
        rng = np.random.default_rng(0)
        triples = [
            (rng.normal(size=1), rng.normal(size=1), rng.normal(size=1))
            for _ in range(50)
        ]
        report = mr.verify_condition(triples)
        assert report.holds
        assert_allclose(report.worst, 1.0, rtol=1e-12)

    def test_convex_fiber_fails_minus_condition(self):
        def value(z):
            return 0.5 * z[1] ** 2

        def gradient(z):
            return np.array([0.0, z[1]])

        mr = ModelReduction(value=value, gradient=gradient, n_dim=2, n_minus=1)
        rng = np.random.default_rng(1)
        triples = [
            (rng.normal(size=1), rng.normal(size=1), rng.normal(size=1))
            for _ in range(20)
        ]
        report = mr.verify_condition(triples)
        assert not report.holds
        assert_allclose(report.worst, -1.0, rtol=1e-12)

    def test_convex_fiber_solver_diverges_loudly(self):
        def value(z):
            return 0.5 * z[1] ** 2

        def gradient(z):
            return np.array([0.0, z[1]])

        mr = ModelReduction(
            value=value, gradient=gradient, n_dim=2, n_minus=1, inner_max_iter=40
        )
        # w = 0 is fiber-stationary here; start the ascent off it
        mr.psi_cache = (np.array([1.0]), np.array([1.0]))
        with pytest.raises(RuntimeError, match="inner solver"):
            mr.solve_psi([1.0])

    def test_large_fiber_uses_gradient_path(self):
        rng = np.random.default_rng(7)
        c = rng.normal(size=78)

        def value(z):
            v, w = z[:2], z[2:]
            return 0.5 * v @ v - 0.5 * w @ w + z[0] * (c @ w)

        def gradient(z):
            v, w = z[:2], z[2:]
            gv = np.array([v[0] + c @ w, v[1]])
            return np.concatenate([gv, -w + z[0] * c])

        mr = ModelReduction(value=value, gradient=gradient, n_dim=80, n_minus=2)
        w = mr.solve_psi([1.3, -0.2])
        assert_allclose(w, 1.3 * c, atol=1e-8)


@pytest.fixture(scope="module")
def quad_setup(g):
    model = quadratic_model(g, np.array([[2.0, 0.5], [0.5, 1.0]]))
    s = solve_weighted_eigenproblem(g, model.a_infinity, count=2 * g.n_nodes)
    split = build_split(s, 3, A_MINUS_CASE)
    h = build_functional(g, model)
    red = build_reduction(h, split, kappa=0.5)
    return s, split, red


class TestQuadraticPencil:
    """Quadratic functionals decouple in the pencil eigenbasis."""

    def test_psi_vanishes_identically(self, quad_setup):
        s, split, red = quad_setup
        rng = np.random.default_rng(3)
        for _ in range(5):
            v = rng.normal(size=red.n_minus) * 4.0
            assert_allclose(solve_psi(red, v), np.zeros(red.mu), atol=1e-9)

    def test_reduced_gradient_is_diagonal(self, quad_setup):
        s, split, red = quad_setup
        lam = np.concatenate(
            [
                np.full(m, lv)
                for lv, m in zip(s.distinct_eigenvalues, s.multiplicities)
            ]
        )
        cut = split.mu
        diag = 1.0 - 1.0 / lam[cut:]
        rng = np.random.default_rng(4)
        v = rng.normal(size=red.n_minus)
        val, grad = reduced_value_and_gradient(red, v)
        assert_allclose(grad, diag * v, atol=1e-8)
        assert_allclose(val, 0.5 * v @ (diag * v), rtol=1e-8, atol=1e-10)


class TestFiberSolver:
    def test_psi_at_origin_is_zero(self, radial_setup):
        _, _, _, _, _, red = radial_setup
        red.psi_cache = None
        w = solve_psi(red, np.zeros(red.n_minus))
        assert_allclose(w, np.zeros(red.mu), atol=1e-12)

    def test_stationarity_residual(self, radial_setup):
        _, _, split, h, _, red = radial_setup
        rng = np.random.default_rng(11)
        for scale in (0.5, 5.0, 50.0):
            v = rng.normal(size=red.n_minus) * scale
            w = solve_psi(red, v)
            res = red.proj_plus @ phi_gradient(h, full_point(red, v, w))
            assert np.linalg.norm(res) <= red.inner_tol * 1.001

    def test_warm_and_cold_starts_agree(self, radial_setup):
        _, _, _, _, _, red = radial_setup
        rng = np.random.default_rng(12)
        v = rng.normal(size=red.n_minus) * 3.0
        red.psi_cache = None
        w_cold = solve_psi(red, v)
        red.psi_cache = (v.copy(), w_cold + rng.normal(size=red.mu))
        w_warm = solve_psi(red, v)
        assert np.linalg.norm(w_cold - w_warm) <= 1e-8

    def test_reduced_gradient_matches_directional_fd(self, radial_setup):
        _, _, _, _, _, red = radial_setup
        rng = np.random.default_rng(13)
        eps = 1e-5
        for _ in range(50):
            v = rng.normal(size=red.n_minus) * rng.choice([0.3, 1.0, 5.0])
            d = rng.normal(size=red.n_minus)
            d /= np.linalg.norm(d)
            _, grad = reduced_value_and_gradient(red, v)
            fd = (reduced_value(red, v + eps * d) - reduced_value(red, v - eps * d)) / (
                2 * eps
            )
            assert_allclose(grad @ d, fd, rtol=1e-5, atol=1e-7)

    def test_reduced_value_dominates_restriction(self, radial_setup):
        # the fiber maximum is at least the value at w = 0
        _, _, _, h, _, red = radial_setup
        rng = np.random.default_rng(14)
        for _ in range(10):
            v = rng.normal(size=red.n_minus) * 5.0
            base = phi_value(h, red.split.minus_basis @ v)
            assert reduced_value(red, v) >= base - 1e-10

    def test_critical_origin_lifts_to_full_residual(self, radial_setup):
        _, _, _, h, _, red = radial_setup
        v0 = np.zeros(red.n_minus)
        val, grad = reduced_value_and_gradient(red, v0)
        assert np.linalg.norm(grad) <= 1e-9
        z = full_point(red, v0, solve_psi(red, v0))
        assert residual_norm(h, z) <= 1e-8

    def test_identity_minus_gradient_bounded(self, radial_setup):
        _, _, _, _, _, red = radial_setup
        rng = np.random.default_rng(15)
        worst = 0.0
        for _ in range(20):
            v = rng.normal(size=red.n_minus)
            v *= 10.0 / np.linalg.norm(v)
            _, grad = reduced_value_and_gradient(red, v)
            worst = max(worst, float(np.linalg.norm(v - grad)))
        assert np.isfinite(worst) and worst < 1e3


class TestConditionVerification:
    def test_radial_kappa_meets_spectral_gap(self, radial_setup):
        model, _, split, h, delta, _ = radial_setup
        rng = np.random.default_rng(21)
        triples = condition_triples(split, rng, n_triples=120)
        report = verify_condition(h, split, A_MINUS_CASE, triples)
        assert report.holds
        assert report.worst >= delta * (1 - 1e-9)

    def test_aniso_kappa_meets_spectral_gap(self, aniso_setup):
        _, model, split, h, delta, _ = aniso_setup
        rng = np.random.default_rng(22)
        triples = condition_triples(split, rng, n_triples=120)
        report = verify_condition(h, split, A_MINUS_CASE, triples)
        assert report.holds
        assert delta > 2.0
        assert report.worst >= delta * (1 - 1e-9)

    def test_wrong_orientation_fails_with_witness(self, radial_setup):
        _, _, split, h, _, _ = radial_setup
        rng = np.random.default_rng(23)
        triples = condition_triples(split, rng, n_triples=60)
        report = verify_condition(h, split, A_PLUS_CASE, triples)
        assert not report.holds
        assert report.worst < 0
        assert report.witness is not None

    def test_determinism(self, aniso_setup):
        _, _, split, h, _, _ = aniso_setup
        rep = []
        for _ in range(2):
            rng = np.random.default_rng(99)
            triples = condition_triples(split, rng, n_triples=40)
            rep.append(verify_condition(h, split, A_MINUS_CASE, triples).worst)
        assert rep[0] == rep[1]


class TestDiagnostics:
    def test_coercivity_on_log_family(self, radial_setup, tmp_path):
        _, _, _, _, _, red = radial_setup
        rng = np.random.default_rng(31)
        report = coercivity_diagnostic(red, rng, ray_count=6)
        assert report.holds
        assert report.details["monotone_from_radius"] is not None
        margin = report.details["nonvanishing_margin"]
        assert margin is None or margin >= -1e-9
        minr = report.details["min_phi"]
        assert minr[-1] > minr[0]
        assert report.details["inf_phi_estimate"] <= minr[0] + 1e-12

        out = tmp_path / "coercivity.csv"
        diagnostic_to_csv(report, out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "radius,min_phi1,min_phi"
        assert len(lines) == 1 + len(report.details["radii"])

    def test_psi_continuity_report(self, aniso_setup):
        _, _, _, _, _, red = aniso_setup
        rng = np.random.default_rng(32)
        report = psi_lipschitz_report(red, rng, n_pairs=10, radius=3.0)
        assert report.holds
        assert 0 < report.worst < 1e3


class TestBuildErrors:
    def test_nonpositive_kappa_rejected(self, radial_setup):
        _, _, split, h, _, _ = radial_setup
        with pytest.raises(ValueError, match="positive"):
            build_reduction(h, split, kappa=0.0)

    def test_coefficient_shape_guard(self, radial_setup):
        _, _, _, _, _, red = radial_setup
        with pytest.raises(ValueError, match="coefficients"):
            solve_psi(red, np.zeros(red.n_minus + 1))
