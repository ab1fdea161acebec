import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from ppcsim import spectral
from ppcsim.spectral import (
    CONST,
    BackgroundSD,
    DiscreteMode,
    SpectralDensity,
    background_reorganization,
    eval_background,
    reorganization_integral,
    sample_thermal_mode,
    thermal_occupation,
    thermal_variance,
)


def test_constants_match_seven_significant_figures():
    assert abs(CONST.kB - 0.6950348) / 0.6950348 < 1e-6
    assert abs(CONST.omega_per_wavenumber - 0.1883651) / 0.1883651 < 1e-6
    # omega conversion is 2 pi c with c in cm/ps
    assert CONST.omega_per_wavenumber == pytest.approx(2 * math.pi * 2.99792458e-2, rel=1e-14)


class TestBackground:
    def test_zero_at_zero_frequency(self):
        sd = BackgroundSD()
        assert eval_background(sd, 0.0) == 0.0

    def test_negative_frequency_rejected(self):
        with pytest.raises(ValueError):
            eval_background(BackgroundSD(), -1.0)

    def test_non_negative_on_dense_grid(self):
        sd = BackgroundSD()
        grid = np.linspace(0.0, 5000.0, 20001)
        assert np.all(eval_background(sd, grid) >= 0.0)

    def test_reorganization_closed_form_default(self):
        # substitution w = omega_{a,b} x^2 reduces each term to 2*9!*omega^5,
        # so the integral is exactly 2*lam independently of the weights
        val = background_reorganization(BackgroundSD(lam=35.0))
        assert val == pytest.approx(70.0, rel=1e-6)

    def test_reorganization_closed_form_random_parameters(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            lam = rng.uniform(5.0, 200.0)
            omega_a = rng.uniform(0.2, 5.0)
            omega_b = rng.uniform(0.2, 5.0)
            sd = BackgroundSD(lam=lam, omega_a=omega_a, omega_b=omega_b)
            assert background_reorganization(sd) == pytest.approx(2 * lam, rel=1e-6)

    def test_independent_quadrature_cross_check(self):
        sd = BackgroundSD()
        ref, _ = integrate.quad(lambda w: eval_background(sd, w) / w, 0, np.inf, limit=500)
        assert background_reorganization(sd) == pytest.approx(ref, rel=1e-8)


class TestReorganizationIntegral:
    def test_background_only(self):
        assert reorganization_integral(SpectralDensity(modes=())) == pytest.approx(70.0, rel=1e-6)

    def test_single_mode_only(self):
        sd = SpectralDensity(background=None, modes=(DiscreteMode(180.0, 0.22),))
        assert reorganization_integral(sd) == pytest.approx(0.22 * 180.0, rel=1e-12)

    def test_canonical_defaults_total(self):
        # 70 (background) + 0.12*37 + 0.22*180
        sd = SpectralDensity.fmo_default()
        assert reorganization_integral(sd) == pytest.approx(114.04, rel=1e-6)

    def test_mode_ordering_enforced(self):
        with pytest.raises(ValueError):
            SpectralDensity(modes=(DiscreteMode(180.0, 0.2), DiscreteMode(37.0, 0.1)))


class TestThermalFunctions:
    def test_occupation_zero_temperature(self):
        assert thermal_occupation(180.0, 0.0) == 0.0

    def test_occupation_known_values(self):
        assert thermal_occupation(180.0, 77.0) == pytest.approx(0.0359, abs=2e-4)
        assert thermal_occupation(180.0, 277.0) == pytest.approx(0.6464, abs=1e-3)

    def test_occupation_domain_errors(self):
        with pytest.raises(ValueError):
            thermal_occupation(0.0, 77.0)
        with pytest.raises(ValueError):
            thermal_occupation(-5.0, 77.0)

    @given(
        omega=st.floats(1.0, 2000.0),
        temperature=st.floats(5.0, 400.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_detailed_balance_identity(self, omega, temperature):
        n = thermal_occupation(omega, temperature)
        lhs = (n + 1.0) / n
        rhs = math.exp(omega / (CONST.kB * temperature))
        assert abs(lhs - rhs) / rhs < 1e-12

    def test_variance_limits(self):
        assert thermal_variance(180.0, 0.0) == 1.0
        assert thermal_variance(180.0, 77.0) == pytest.approx(1.0717, abs=1e-3)


class TestThermalSampling:
    def test_variance_matches_coth(self):
        mode = DiscreteMode(180.0, 0.22)
        rng = np.random.default_rng(5)
        x, p = sample_thermal_mode(mode, 77.0, rng, size=10**6)
        target = thermal_variance(180.0, 77.0)
        assert np.var(x) == pytest.approx(target, rel=1e-2)
        assert np.var(p) == pytest.approx(target, rel=1e-2)

    def test_sample_mean_statistical(self):
        mode = DiscreteMode(180.0, 0.22)
        rng = np.random.default_rng(17)
        n = 10**6
        x, p = sample_thermal_mode(mode, 77.0, rng, size=n)
        sigma = math.sqrt(thermal_variance(180.0, 77.0))
        assert abs(x.mean()) < 5 * sigma / math.sqrt(n)
        assert abs(p.mean()) < 5 * sigma / math.sqrt(n)

    def test_zero_temperature_vacuum_width(self):
        mode = DiscreteMode(120.0, 0.1)
        rng = np.random.default_rng(3)
        x, _ = sample_thermal_mode(mode, 0.0, rng, size=200000)
        assert np.var(x) == pytest.approx(1.0, rel=2e-2)


def test_mode_validation():
    with pytest.raises(ValueError):
        DiscreteMode(-5.0, 0.1)
    with pytest.raises(ValueError):
        DiscreteMode(180.0, -0.1)
    with pytest.raises(ValueError):
        DiscreteMode(180.0, 0.1, damping_time=0.0)
    assert DiscreteMode(180.0, 0.22).coupling == pytest.approx(math.sqrt(0.22) * 180.0)
