"""Critical groups, Brouwer indices, and the homological identity checks."""

import json

import numpy as np
import pytest

from saddlekit.homology import (
    ModelFunctional,
    brouwer_index,
    builtin_models,
    critical_groups,
    critical_groups_at_infinity,
    cubical_sublevel_pair,
    model_reduction,
    morse_inequality_check,
    reduced_functional,
    report_to_json,
    validate_model_functional,
    verify_index_shift,
    verify_shift_theorem,
    verify_theorem_A,
)
from saddlekit.spectral import A_MINUS_CASE


@pytest.fixture(scope="module")
def models():
    return builtin_models()


def model_1d(name, value, gradient):
    return ModelFunctional(
        name=name,
        n=1,
        value=lambda z: value(np.asarray(z, dtype=float)[..., 0]),
        gradient=lambda z: np.stack(
            [gradient(np.asarray(z, dtype=float)[..., 0])], axis=-1
        ),
    )


def quadratic_form(signs):
    s = np.asarray(signs, dtype=float)
    return ModelFunctional(
        name="quadratic_" + "".join("p" if x > 0 else "m" for x in signs),
        n=len(signs),
        value=lambda z: np.sum(s * np.asarray(z, dtype=float) ** 2, axis=-1),
        gradient=lambda z: 2 * s * np.asarray(z, dtype=float),
    )


class TestModelBattery:
    def test_all_gradients_match_finite_differences(self, models):
        rng = np.random.default_rng(7)
        for m in models.values():
            rep = validate_model_functional(m, rng=rng)
            assert rep.holds, f"{m.name}: worst {rep.worst}"

    def test_battery_has_degenerate_concave_fiber_models(self, models):
        degenerate = {"quartic_fiber_saddle", "coupled_quartic", "monkey_fiber"}
        for name in degenerate:
            assert models[name].side == A_MINUS_CASE
        assert len(degenerate) >= 2

    def test_split_models_expose_mu(self, models):
        assert models["plane_saddle_mu2"].mu == 2
        assert models["saddle_2d"].mu == 1
        with pytest.raises(ValueError, match="no coordinate split"):
            _ = models["monkey_2d"].mu


class TestSublevelPair:
    def test_pair_masks_consistent(self, models):
        pair = cubical_sublevel_pair(models["monkey_2d"], [0.0, 0.0], 1.0)
        assert pair.subcomplex_mask.any()
        assert not np.any(pair.excision_mask & ~pair.subcomplex_mask)

    def test_point_near_custom_box_boundary_rejected(self, models):
        with pytest.raises(ValueError, match="box boundary"):
            cubical_sublevel_pair(
                models["bowl_2d"], [0.0, 0.0], 0.5, center=[0.45, 0.0]
            )

    def test_empty_sublevel_rejected(self, models):
        with pytest.raises(ValueError, match="empty"):
            cubical_sublevel_pair(models["bowl_2d"], [0.0, 0.0], 0.5, level=-1.0)

    def test_coarse_resolution_rejected(self, models):
        with pytest.raises(ValueError, match="below 16"):
            cubical_sublevel_pair(models["bowl_2d"], [0.0, 0.0], 0.5, resolution=8)

    def test_dimension_cap_enforced(self):
        big = ModelFunctional(
            name="five_dim",
            n=5,
            value=lambda z: np.sum(np.asarray(z, dtype=float) ** 2, axis=-1),
            gradient=lambda z: 2 * np.asarray(z, dtype=float),
        )
        with pytest.raises(ValueError, match="exceeds the cap"):
            cubical_sublevel_pair(big, np.zeros(5), 0.5)


class TestCriticalGroups:
    def test_minimum(self, models):
        bv = critical_groups(models["bowl_2d"], [0.0, 0.0])
        assert bv.ranks == (1, 0, 0)
        assert bv.stable

    def test_monkey_saddle(self, models):
        details = {}
        bv = critical_groups(models["monkey_2d"], [0.0, 0.0], details=details)
        assert bv.ranks == (0, 2, 0)
        assert bv.stable
        assert details["ranks_by_resolution"][16] == (0, 2, 0)
        assert details["isolated"]

    def test_nondegenerate_points_give_delta_at_index(self):
        for signs, m in [((1, 1), 0), ((-1, 1), 1), ((-1, -1), 2), ((1, -1, -1), 2)]:
            bv = critical_groups(quadratic_form(signs), np.zeros(len(signs)))
            want = tuple(1 if q == m else 0 for q in range(len(signs) + 1))
            assert bv.ranks == want
            assert bv.stable

    def test_degenerate_quartics_in_one_dimension(self):
        x4 = model_1d("x4", lambda x: x**4, lambda x: 4 * x**3)
        nx4 = model_1d("neg_x4", lambda x: -(x**4), lambda x: -4 * x**3)
        assert critical_groups(x4, [0.0]).ranks == (1, 0)
        assert critical_groups(nx4, [0.0]).ranks == (0, 1)

    def test_shifted_well_minimum(self, models):
        bv = critical_groups(models["double_well_2d"], [1.0, 0.0], box_radius=0.4)
        assert bv.ranks == (1, 0, 0)

    def test_non_isolated_point_warns_and_flags(self, models):
        details = {}
        with pytest.warns(UserWarning, match="not isolated"):
            critical_groups(
                models["double_well_2d"], [1.0, 0.0], box_radius=1.6, details=details
            )
        assert details["isolated"] is False


class TestKunnethProducts:
    FACTORS = {
        "sq": (lambda x: x**2, lambda x: 2 * x, (1, 0)),
        "msq": (lambda x: -(x**2), lambda x: -2 * x, (0, 1)),
        "q4": (lambda x: x**4, lambda x: 4 * x**3, (1, 0)),
        "mq4": (lambda x: -(x**4), lambda x: -4 * x**3, (0, 1)),
    }

    @pytest.mark.parametrize(
        "left,right",
        [("sq", "msq"), ("q4", "msq"), ("msq", "msq"), ("mq4", "sq"), ("q4", "q4")],
    )
    def test_product_ranks_are_convolutions(self, left, right):
        fl, gl, bl = self.FACTORS[left]
        fr, gr, br = self.FACTORS[right]
        product = ModelFunctional(
            name=f"{left}_x_{right}",
            n=2,
            value=lambda z: fl(np.asarray(z, dtype=float)[..., 0])
            + fr(np.asarray(z, dtype=float)[..., 1]),
            gradient=lambda z: np.stack(
                [
                    gl(np.asarray(z, dtype=float)[..., 0]),
                    gr(np.asarray(z, dtype=float)[..., 1]),
                ],
                axis=-1,
            ),
        )
        bv = critical_groups(product, [0.0, 0.0])
        want = tuple(int(c) for c in np.convolve(bl, br))[:3]
        assert bv.ranks == want
        assert bv.stable


class TestGroupsAtInfinity:
    def test_coercive_model_is_contractible_pair(self, models):
        details = {}
        bv = critical_groups_at_infinity(models["bowl_2d"], -1.0, 3.0, details=details)
        assert bv.ranks == (1, 0, 0)
        assert bv.stable
        assert details["boundary_ok"]

    def test_anticoercive_model_carries_top_class(self, models):
        bv = critical_groups_at_infinity(models["cap_2d"], -4.0, 3.0)
        assert bv.ranks == (0, 0, 1)
        assert bv.stable

    def test_saddle_at_infinity(self, models):
        bv = critical_groups_at_infinity(models["saddle_2d"], -4.0, 3.0)
        assert bv.ranks == (0, 1, 0)

    def test_alpha_above_a_critical_value_rejected(self, models):
        with pytest.raises(ValueError, match="not below the critical value"):
            critical_groups_at_infinity(models["bowl_2d"], 0.5, 3.0)

    def test_vanishing_boundary_gradient_sets_caveat(self):
        flat = ModelFunctional(
            name="flat_gradient",
            n=2,
            value=lambda z: -np.sum(np.asarray(z, dtype=float) ** 2, axis=-1),
            gradient=lambda z: 0.0 * np.asarray(z, dtype=float),
        )
        details = {}
        with pytest.warns(UserWarning, match="unverified"):
            critical_groups_at_infinity(
                flat, -4.0, 3.0, check_critical_values=False, details=details
            )
        assert details["boundary_ok"] is False


class TestShiftTheorem:
    EXPECTED = {
        "saddle_2d": ((0, 1, 0), (1, 0), 1),
        "coupled_quartic": ((0, 1, 0), (1, 0), 1),
        "quartic_fiber_saddle": ((0, 1, 0), (1, 0), 1),
        "monkey_fiber": ((0, 0, 2, 0), (0, 2, 0), 1),
        "plane_saddle_mu2": ((0, 0, 1, 0), (1, 0), 2),
    }

    @pytest.mark.parametrize("name", sorted(EXPECTED))
    def test_shift_holds_on_battery(self, models, name):
        m = models[name]
        rep = verify_shift_theorem(m, np.zeros(m.n))
        want_f, want_phi, want_mu = self.EXPECTED[name]
        assert rep["betti_f"].ranks == want_f
        assert rep["betti_phi"].ranks == want_phi
        assert rep["mu"] == want_mu
        assert rep["shift_holds"]
        assert rep["stable"]
        assert rep["condition"].holds

    def test_convex_fiber_model_rejected(self, models):
        with pytest.raises(ValueError, match="concave-fiber"):
            verify_shift_theorem(models["well_fiber"], [1.0, 0.0])

    def test_unsplit_model_rejected(self, models):
        with pytest.raises(ValueError, match="concave-fiber"):
            verify_shift_theorem(models["monkey_2d"], [0.0, 0.0])

    def test_wide_fiber_rejected(self):
        wide = ModelFunctional(
            name="wide_fiber",
            n=4,
            value=lambda z: np.asarray(z, dtype=float)[..., 0] ** 2
            - np.sum(np.asarray(z, dtype=float)[..., 1:] ** 2, axis=-1),
            gradient=lambda z: np.asarray(z, dtype=float)
            * np.array([2.0, -2.0, -2.0, -2.0]),
            split=(1, 3),
            side=A_MINUS_CASE,
        )
        with pytest.raises(ValueError, match="exceeds the supported cap"):
            verify_shift_theorem(wide, np.zeros(4))

    def test_off_manifold_point_warns_then_lifts(self, models):
        with pytest.warns(UserWarning, match="off the reduced manifold"):
            rep = verify_shift_theorem(models["saddle_2d"], [0.0, 0.5])
        assert rep["shift_holds"]
        assert rep["point"] == [0.0, 0.0]

    def test_report_is_deterministic(self, models):
        a = verify_shift_theorem(models["coupled_quartic"], [0.0, 0.0])
        b = verify_shift_theorem(models["coupled_quartic"], [0.0, 0.0])
        assert a["betti_f"].ranks == b["betti_f"].ranks
        assert a["condition"].worst == b["condition"].worst


class TestTheoremA:
    def test_variant_i_coercive(self, models):
        rep = verify_theorem_A(models["coercive_quartic_fiber"], "i")
        assert rep["betti_f"].ranks == (1, 0, 0)
        assert rep["betti_phi"].ranks == (1, 0)
        assert rep["shift"] == 0
        assert rep["holds"]

    def test_variant_ii_anticoercive(self, models):
        rep = verify_theorem_A(models["cap_2d"], "ii")
        assert rep["betti_f"].ranks == (0, 0, 1)
        assert rep["betti_phi"].ranks == (0, 1)
        assert rep["shift"] == 1
        assert rep["holds"]

    def test_variant_iii_local(self, models):
        rep = verify_theorem_A(models["well_fiber"], "iii", u=[1.0, 0.0], box_radius=0.4)
        assert rep["betti_f"].ranks == (1, 0, 0)
        assert rep["betti_phi"].ranks == (1, 0)
        assert rep["holds"]

    def test_side_mismatch_rejected(self, models):
        with pytest.raises(ValueError, match="needs a"):
            verify_theorem_A(models["cap_2d"], "i")
        with pytest.raises(ValueError, match="needs a"):
            verify_theorem_A(models["well_fiber"], "ii")

    def test_unknown_variant_rejected(self, models):
        with pytest.raises(ValueError, match="variant must be"):
            verify_theorem_A(models["cap_2d"], "iv")

    def test_variant_iii_needs_point(self, models):
        with pytest.raises(ValueError, match="needs the critical point"):
            verify_theorem_A(models["well_fiber"], "iii")


class TestBrouwerIndex:
    def test_minimum_has_index_one(self, models):
        details = {}
        assert brouwer_index(models["bowl_2d"], [0.0, 0.0], details=details) == 1
        assert details["poincare_hopf"] == 1
        assert details["routes_agree"]

    def test_nondegenerate_index_is_determinant_sign(self):
        for signs, m in [((1, 1), 0), ((-1, 1), 1), ((-1, -1), 2)]:
            assert brouwer_index(quadratic_form(signs), np.zeros(2)) == (-1) ** m

    def test_monkey_saddle_index(self, models):
        details = {}
        assert brouwer_index(models["monkey_2d"], [0.0, 0.0], details=details) == -2
        assert details["poincare_hopf"] == -2
        assert details["n_preimages"] == 2
        assert details["preimage_counts"] == (-2, -2)

    def test_degenerate_maximum_in_one_dimension(self):
        nx4 = model_1d("neg_x4", lambda x: -(x**4), lambda x: -4 * x**3)
        assert brouwer_index(nx4, [0.0]) == -1


class TestIndexShift:
    EXPECTED = {
        "saddle_2d": (-1, 1),
        "quartic_fiber_saddle": (-1, 1),
        "cap_2d": (1, -1),
        "monkey_fiber": (2, -2),
    }

    @pytest.mark.parametrize("name", sorted(EXPECTED))
    def test_index_shift_holds_on_battery(self, models, name):
        m = models[name]
        rep = verify_index_shift(m, np.zeros(m.n))
        want_full, want_reduced = self.EXPECTED[name]
        assert rep["ind_full"] == want_full
        assert rep["ind_reduced"] == want_reduced
        assert rep["holds"]
        assert rep["full_routes"]["routes_agree"]
        assert rep["reduced_routes"]["routes_agree"]


class TestMorseInequalities:
    def test_single_minimum(self, models):
        rep = morse_inequality_check(models["bowl_2d"], box_radius=2.0)
        assert rep["M_poly"] == (1, 0, 0)
        assert rep["beta_poly"] == (1, 0, 0)
        assert rep["Q_coeffs"] == (0, 0)
        assert rep["remainder"] == 0
        assert rep["holds"]

    def test_double_well(self, models):
        rep = morse_inequality_check(models["double_well_2d"], box_radius=2.0)
        assert rep["M_poly"] == (2, 1, 0)
        assert rep["beta_poly"] == (1, 0, 0)
        assert rep["Q_coeffs"] == (1, 0)
        assert rep["holds"]
        assert len(rep["points"]) == 3
        assert rep["euler_M"] == rep["euler_beta"]

    def test_omitted_point_reports_violation(self, models):
        full = morse_inequality_check(models["double_well_2d"], box_radius=2.0)
        kept = [p for p in full["points"] if abs(p[0]) > 0.5]
        rep = morse_inequality_check(
            models["double_well_2d"], box_radius=2.0, points=kept
        )
        assert rep["remainder"] != 0
        assert not rep["holds"]

    def test_euler_characteristics_agree_when_holds(self, models):
        for name in ("bowl_2d", "double_well_2d"):
            rep = morse_inequality_check(models[name], box_radius=2.0)
            if rep["holds"]:
                assert rep["euler_M"] == rep["euler_beta"]


class TestReductionBridge:
    def test_reduced_functional_of_coupled_quartic(self, models):
        phi = reduced_functional(models["coupled_quartic"])
        v = np.linspace(-1.0, 1.0, 9).reshape(-1, 1)
        # psi(v) = -v, phi(v) = v^4 + v^2
        got = phi.value(v)
        want = v[:, 0] ** 4 + v[:, 0] ** 2
        np.testing.assert_allclose(got, want, atol=1e-9)
        grad = phi.gradient(v)
        np.testing.assert_allclose(grad[:, 0], 4 * v[:, 0] ** 3 + 2 * v[:, 0], atol=1e-7)

    def test_model_reduction_requires_split(self, models):
        with pytest.raises(ValueError, match="no coordinate split"):
            model_reduction(models["monkey_2d"])


class TestReports:
    def test_shift_report_roundtrips_to_json(self, models, tmp_path):
        rep = verify_shift_theorem(models["monkey_fiber"], np.zeros(3))
        path = tmp_path / "shift.json"
        report_to_json(rep, path)
        loaded = json.loads(path.read_text())
        assert loaded["schema_version"] == 1
        assert loaded["model_id"] == "monkey_fiber"
        assert loaded["operation"] == "shift_theorem"
        assert loaded["betti_f"] == {"ranks": [0, 0, 2, 0], "stable": True}
        assert loaded["betti_phi"]["ranks"] == [0, 2, 0]
        assert loaded["mu"] == 1
        assert loaded["shift_holds"] is True
        assert loaded["condition"]["holds"] is True

    def test_morse_report_roundtrips_to_json(self, models, tmp_path):
        rep = morse_inequality_check(models["double_well_2d"], box_radius=2.0)
        path = tmp_path / "morse.json"
        report_to_json(rep, path)
        loaded = json.loads(path.read_text())
        assert loaded["M_poly"] == [2, 1, 0]
        assert loaded["Q_coeffs"] == [1, 0]
        assert loaded["holds"] is True
