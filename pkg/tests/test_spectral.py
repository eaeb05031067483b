"""Weighted eigenproblem oracles on systems that decouple in closed form.

With a constant weight that diagonalizes as Q diag(m1, m2) Q^T, the pencil
splits into two scalar problems with eigenvalues lambda_j / m1 and
lambda_j / m2, where lambda_j are the closed-form Dirichlet Laplacian
eigenvalues.  That gives exact expected spectra, multiplicities, and
cluster structure without touching the solver under test.
"""

import csv

import numpy as np
import pytest

from saddlekit.fields import constant_field, diagonal_field
from saddlekit.grid import build_grid, laplacian, laplacian_eigenvalues_1d
from saddlekit.spectral import (
    A_MINUS_CASE,
    A_PLUS_CASE,
    build_split,
    cumulative_dims,
    normalize_resonance,
    resonant_index,
    solve_weighted_eigenproblem,
    spectrum_to_csv,
)


@pytest.fixture
def g():
    return build_grid((0.0, 1.0), 31)


@pytest.fixture
def g_small():
    return build_grid((0.0, 1.0), 15)


class TestDecoupledOracles:
    def test_identity_weight_doubles_multiplicities(self, g):
        s = solve_weighted_eigenproblem(g, constant_field(np.eye(2)), count=10)
        lam = laplacian_eigenvalues_1d(g)[:5]
        np.testing.assert_allclose(s.distinct_eigenvalues, lam, rtol=1e-10)
        np.testing.assert_array_equal(s.multiplicities, [2, 2, 2, 2, 2])

    def test_diag_weight_merges_simple(self, g):
        s = solve_weighted_eigenproblem(g, diagonal_field(1.0, 4.0), count=8)
        lam = laplacian_eigenvalues_1d(g)
        expected = np.sort(np.concatenate([lam, lam / 4.0]))[:8]
        np.testing.assert_allclose(s.distinct_eigenvalues, expected, rtol=1e-9)
        np.testing.assert_array_equal(s.multiplicities, np.ones(8, dtype=int))

    def test_coupled_constant_weight(self, g):
        # [[2,1],[1,2]] has eigenvalues 1 and 3; rotation decouples the system
        s = solve_weighted_eigenproblem(
            g, constant_field([[2.0, 1.0], [1.0, 2.0]]), count=6
        )
        lam = laplacian_eigenvalues_1d(g)
        expected = np.sort(np.concatenate([lam, lam / 3.0]))[:6]
        np.testing.assert_allclose(s.distinct_eigenvalues, expected, rtol=1e-9)

    def test_homogeneity(self, g):
        a = constant_field([[2.0, 0.5], [0.5, 1.0]])
        s1 = solve_weighted_eigenproblem(g, a, count=6)
        from saddlekit.fields import scaled_field

        s2 = solve_weighted_eigenproblem(g, scaled_field(a, 3.7), count=6)
        np.testing.assert_allclose(
            s2.distinct_eigenvalues, s1.distinct_eigenvalues / 3.7, rtol=1e-10
        )


class TestPairQuality:
    def test_h10_orthonormal(self, g):
        s = solve_weighted_eigenproblem(g, constant_field(np.eye(2)), count=10)
        basis = np.hstack(s.eigenspaces)
        lap = laplacian(g).toarray()
        lb = np.block(
            [
                [lap, np.zeros_like(lap)],
                [np.zeros_like(lap), lap],
            ]
        )
        gram = g.quad_weight * basis.T @ lb @ basis
        np.testing.assert_allclose(gram, np.eye(10), atol=1e-8)

    def test_residuals_tracked(self, g):
        s = solve_weighted_eigenproblem(g, diagonal_field(1.0, 4.0), count=8)
        assert s.residuals.shape == (8,)
        assert s.residuals.max() <= 1e-8

    def test_rejects_indefinite_weight(self, g):
        with pytest.raises(ValueError, match="node"):
            solve_weighted_eigenproblem(g, diagonal_field(1.0, -1.0), count=4)

    def test_rejects_bad_count(self, g):
        with pytest.raises(ValueError):
            solve_weighted_eigenproblem(g, diagonal_field(1.0, 1.0), count=0)
        with pytest.raises(ValueError):
            solve_weighted_eigenproblem(
                g, diagonal_field(1.0, 1.0), count=2 * g.n_nodes + 1
            )


class TestCountsAndResonance:
    def test_cumulative_dims(self, g):
        s = solve_weighted_eigenproblem(g, constant_field(np.eye(2)), count=10)
        assert cumulative_dims(s, 0) == 0
        assert cumulative_dims(s, 1) == 2
        assert cumulative_dims(s, 3) == 6
        with pytest.raises(ValueError):
            cumulative_dims(s, 6)

    def test_normalize_resonance_pins_unit_eigenvalue(self, g):
        a = constant_field(np.eye(2))
        a_res = normalize_resonance(a, k=2, g=g)
        s = solve_weighted_eigenproblem(g, a_res, count=8)
        assert s.distinct_eigenvalues[1] == pytest.approx(1.0, rel=1e-10)
        assert resonant_index(s) == 2
        np.testing.assert_array_equal(s.multiplicities, [2, 2, 2, 2])

    def test_resonant_index_none_off_resonance(self, g):
        s = solve_weighted_eigenproblem(g, constant_field(np.eye(2)), count=4)
        assert resonant_index(s) is None

    def test_normalize_rejects_bad_index(self, g):
        with pytest.raises(ValueError):
            normalize_resonance(constant_field(np.eye(2)), 0, g)


class TestSplit:
    def full_spectrum(self, g):
        return solve_weighted_eigenproblem(
            g, constant_field(np.eye(2)), count=2 * g.n_nodes
        )

    def test_minus_case_finite_plus_side(self, g_small):
        s = self.full_spectrum(g_small)
        split = build_split(s, k=2, side=A_MINUS_CASE)
        assert split.mu == 2
        assert split.plus_basis.shape == (2 * g_small.n_nodes, 2)
        assert split.minus_basis.shape[1] == 2 * g_small.n_nodes - 2

    def test_minus_case_k1_empty_plus(self, g_small):
        split = build_split(self.full_spectrum(g_small), k=1, side=A_MINUS_CASE)
        assert split.mu == 0
        assert split.plus_basis.shape == (2 * g_small.n_nodes, 0)

    def test_plus_case_finite_minus_side(self, g_small):
        split = build_split(self.full_spectrum(g_small), k=2, side=A_PLUS_CASE)
        assert split.minus_basis.shape[1] == 4
        assert split.mu == 2 * g_small.n_nodes - 4

    def test_blocks_h10_orthogonal_and_complete(self, g_small):
        split = build_split(self.full_spectrum(g_small), k=3, side=A_MINUS_CASE)
        lap = laplacian(g_small).toarray()
        z = np.zeros((2 * g_small.n_nodes, 2 * g_small.n_nodes))
        lb = np.block([[lap, z[: g_small.n_nodes, : g_small.n_nodes]], [z[: g_small.n_nodes, : g_small.n_nodes], lap]])
        cross = g_small.quad_weight * split.plus_basis.T @ lb @ split.minus_basis
        np.testing.assert_allclose(cross, 0.0, atol=1e-9)
        # H^1_0-orthogonal projections onto the two blocks reassemble z
        rng = np.random.default_rng(3)
        vec = rng.normal(size=2 * g_small.n_nodes)
        coeff_p = g_small.quad_weight * split.plus_basis.T @ (lb @ vec)
        coeff_m = g_small.quad_weight * split.minus_basis.T @ (lb @ vec)
        recon = split.plus_basis @ coeff_p + split.minus_basis @ coeff_m
        np.testing.assert_allclose(recon, vec, atol=1e-7)

    def test_split_errors(self, g_small):
        s = self.full_spectrum(g_small)
        with pytest.raises(ValueError):
            build_split(s, k=0)
        with pytest.raises(ValueError):
            build_split(s, k=s.n_distinct + 1)
        with pytest.raises(ValueError):
            build_split(s, k=2, side="sideways")
        partial = solve_weighted_eigenproblem(
            g_small, constant_field(np.eye(2)), count=6
        )
        with pytest.raises(ValueError, match="complete"):
            build_split(partial, k=2)


def test_csv_export(tmp_path, g):
    s = solve_weighted_eigenproblem(g, diagonal_field(1.0, 4.0), count=8)
    path = tmp_path / "spectrum.csv"
    spectrum_to_csv(s, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["index", "eigenvalue", "multiplicity", "d_n"]
    assert len(rows) == 1 + s.n_distinct
    assert int(rows[-1][3]) == s.n_pairs
    got = float(rows[1][1])
    assert got == pytest.approx(s.distinct_eigenvalues[0], rel=1e-14)
