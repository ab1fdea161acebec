import math

import numpy as np
import pytest

from ppcsim import oracles, redfield
from ppcsim.errors import DegenerateSpectrumError
from ppcsim.exciton import SiteHamiltonian, build_dimer, coupling_coefficients, diagonalize
from ppcsim.spectral import (
    KB_CM1_PER_K,
    BackgroundSD,
    SpectralDensity,
    eval_background,
    thermal_occupation,
)

SD = SpectralDensity(modes=())


@pytest.fixture(scope="module")
def dimer():
    h = build_dimer(130.0, 53.5)
    basis = diagonalize(h)
    return basis, coupling_coefficients(basis)


class TestRelaxationRates:
    def test_zero_density_means_zero_rate(self, dimer):
        basis, k = dimer
        flat = lambda w: np.zeros_like(np.asarray(w, dtype=float))
        assert redfield.relaxation_rate(basis, k, flat, 77.0, 1, 0) == 0.0

    def test_boltzmann_ratio_at_gap(self, dimer):
        basis, k = dimer
        up = redfield.relaxation_rate(basis, k, SD, 77.0, 0, 1)
        down = redfield.relaxation_rate(basis, k, SD, 77.0, 1, 0)
        gap = basis.gap(2, 1)
        assert up / down == pytest.approx(math.exp(-gap / (KB_CM1_PER_K * 77.0)), rel=1e-12)
        # at the paper's rounded gap of 170 cm^-1 the ratio is 0.0418
        n170 = thermal_occupation(170.0, 77.0)
        assert n170 / (n170 + 1.0) == pytest.approx(0.0418, abs=1e-3)

    def test_downhill_golden_rule_value(self, dimer):
        basis, k = dimer
        gap = basis.gap(2, 1)
        k2 = float(np.sum(k[:, 0, 1] ** 2))
        expected = (
            2.0 * math.pi * redfield.RAD_PS_PER_CM1 * k2
            * eval_background(BackgroundSD(), gap)
            * (thermal_occupation(gap, 77.0) + 1.0)
        )
        got = redfield.relaxation_rate(basis, k, SD, 77.0, 1, 0)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_zero_temperature_uphill_vanishes(self, dimer):
        basis, k = dimer
        assert redfield.relaxation_rate(basis, k, SD, 0.0, 0, 1) == 0.0
        assert redfield.relaxation_rate(basis, k, SD, 0.0, 1, 0) > 0.0

    def test_degenerate_pair_rejected(self):
        basis = diagonalize(SiteHamiltonian(np.array([50.0, 50.0]), np.zeros((2, 2))))
        k = coupling_coefficients(basis)
        with pytest.raises(DegenerateSpectrumError, match="secular"):
            redfield.relaxation_rate(basis, k, SD, 77.0, 0, 1)

    def test_detailed_balance_random_dimers(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            h = build_dimer(rng.uniform(30, 300), rng.uniform(10, 120))
            basis = diagonalize(h)
            k = coupling_coefficients(basis)
            temp = rng.uniform(30, 350)
            rates = redfield.build_rates(basis, k, SD, temp)
            gap = basis.gap(2, 1)
            ratio = rates.rates[0, 1] / rates.rates[1, 0]
            assert ratio == pytest.approx(math.exp(-gap / (KB_CM1_PER_K * temp)), rel=1e-8)

    def test_generator_columns_sum_to_zero_and_boltzmann_stationary(self, dimer):
        basis, k = dimer
        rates = redfield.build_rates(basis, k, SD, 77.0)
        gen = rates.generator()
        assert np.abs(gen.sum(axis=0)).max() < 1e-12
        evals, vecs = np.linalg.eig(gen)
        stat = np.real(vecs[:, np.argmin(np.abs(evals))])
        stat /= stat.sum()
        boltz = np.exp(-basis.energies / (KB_CM1_PER_K * 77.0))
        boltz /= boltz.sum()
        assert np.allclose(stat, boltz, atol=1e-12)


class TestPureDephasing:
    def test_zero_at_time_zero(self):
        assert redfield.pure_dephasing_rate(SD, 77.0, 0.0) == 0.0

    def test_vanishes_at_long_times_super_ohmic(self):
        peak = max(
            abs(redfield.pure_dephasing_rate(SD, 77.0, t)) for t in np.linspace(0.01, 0.3, 30)
        )
        late = abs(redfield.pure_dephasing_rate(SD, 77.0, 5.0))
        assert late < 5e-3 * peak

    def test_accumulated_exponent_matches_independent_boson(self):
        grid = np.linspace(0.0, 2.0, 81)
        prof = redfield.dephasing_profile(SD, 77.0, grid)
        ref = oracles.decoherence_exponent(BackgroundSD(), 77.0, grid)
        assert np.abs(prof.exponent - ref).max() < 1e-4

    def test_ohmic_limit_positive_and_linear_in_temperature(self):
        ohmic = lambda w: np.asarray(w, dtype=float) * np.exp(-np.asarray(w, dtype=float) / 50.0)
        g1 = redfield.pure_dephasing_rate(ohmic, 77.0, 4.0, omega_max=3000.0)
        g2 = redfield.pure_dephasing_rate(ohmic, 154.0, 4.0, omega_max=3000.0)
        assert g1 > 0
        assert g2 / g1 == pytest.approx(2.0, rel=2e-2)
        # tends to the Markovian constant pi * u * kB * T
        assert g1 == pytest.approx(
            math.pi * redfield.RAD_PS_PER_CM1 * KB_CM1_PER_K * 77.0, rel=5e-2
        )


class TestSuppression:
    def test_unity_at_time_zero(self):
        assert redfield.suppression_factor(SD, 77.0, 1.0, 0.0) == 1.0

    def test_plateau_ordering_in_temperature(self):
        s77 = redfield.suppression_factor(SD, 77.0, 1.0, 2.0)
        s277 = redfield.suppression_factor(SD, 277.0, 1.0, 2.0)
        assert 0.0 < s277 < s77 < 1.0

    def test_plateau_matches_oracle_decoherence_function(self):
        for temp in (77.0, 277.0):
            got = redfield.suppression_factor(SD, temp, 1.0, 2.0)
            ref = float(oracles.independent_boson_coherence(BackgroundSD(), temp, 1.0, 2.0))
            assert abs(got - ref) < 1e-4

    def test_approximately_non_increasing_on_run_grid(self):
        grid = np.linspace(0.0, 2.0, 201)
        prof = redfield.dephasing_profile(SD, 77.0, grid)
        supp = np.exp(-prof.exponent)
        # the transient rate oscillates slightly below zero; increases stay tiny
        assert np.diff(supp).max() < 1e-4


class TestSecularTensor:
    def test_trace_preservation(self, dimer):
        basis, k = dimer
        tensor = redfield.assemble_secular_tensor(basis, k, SD, 77.0, np.linspace(0, 1, 41))
        gen = tensor.rates.generator()
        assert np.abs(gen.sum(axis=0)).max() < 1e-12

    def test_uphill_rates_vanish_at_zero_temperature(self, dimer):
        basis, k = dimer
        tensor = redfield.assemble_secular_tensor(basis, k, SD, 0.0, np.linspace(0, 1, 11))
        assert tensor.rates.rates[0, 1] == 0.0

    def test_kappa_structure(self, dimer):
        basis, k = dimer
        tensor = redfield.assemble_secular_tensor(basis, k, SD, 77.0, np.linspace(0, 1, 11))
        k_diag = np.array([k[:, n, n] for n in range(2)]).T  # (site, exciton)
        expected_eg = float(np.sum(k_diag[:, 0] ** 2))
        assert tensor.kappa[1, 0] == pytest.approx(expected_eg, rel=1e-12)
        expected_12 = float(np.sum((k_diag[:, 0] - k_diag[:, 1]) ** 2))
        assert tensor.kappa[1, 2] == pytest.approx(expected_12, rel=1e-12)

    def test_markovian_only_eg_decay_is_twice_lifetime(self, dimer):
        # dimer version of the Markovian-contrast check: with pure dephasing
        # off, |rho_e1g| decays at half the e1 relaxation rate exactly
        basis, k = dimer
        grid = np.linspace(0.0, 4.0, 161)
        tensor = redfield.assemble_secular_tensor(basis, k, SD, 77.0, grid)
        rho0 = np.zeros((3, 3), dtype=complex)
        rho0[0, 0] = rho0[1, 1] = 0.5
        rho0[0, 1] = rho0[1, 0] = 0.5
        rho = redfield.propagate(tensor, rho0, grid, pure_dephasing=False)
        coh = np.abs(rho[:, 1, 0])
        tau1 = tensor.rates.lifetime(0)
        fitted = -1.0 / np.polyfit(grid, np.log(coh / coh[0]), 1)[0]
        assert fitted == pytest.approx(2.0 * tau1, rel=1e-6)

    def test_propagation_conserves_trace_and_hermiticity(self, dimer):
        basis, k = dimer
        grid = np.linspace(0.0, 1.0, 101)
        tensor = redfield.assemble_secular_tensor(basis, k, SD, 77.0, grid)
        psi = np.array([0.0, 1.0, 1.0], dtype=complex) / np.sqrt(2)
        rho0 = np.outer(psi, psi.conj())
        rho = redfield.propagate(tensor, rho0, grid)
        tr = np.einsum("tnn->t", rho).real
        assert np.abs(tr - 1.0).max() < 1e-12
        assert np.abs(rho - np.conj(np.swapaxes(rho, 1, 2))).max() < 1e-12
