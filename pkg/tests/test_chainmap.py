from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate

from ppcsim import oracles
from ppcsim.chainmap import (
    ChainCoefficients,
    DiscretizedMeasure,
    discretize,
    gauss_rule,
    lanczos_tridiagonalize,
    map_background,
    recurrence_coefficients,
)
from ppcsim.errors import ChainBreakdownError, NumericsError
from ppcsim.spectral import BackgroundSD, eval_background


def _power_measure(s: float, n_nodes: int = 600) -> DiscretizedMeasure:
    gx, gw = np.polynomial.legendre.leggauss(n_nodes)
    x = 0.5 * (gx + 1.0)
    w = 0.5 * gw * x**s
    keep = w > 0
    return DiscretizedMeasure(x[keep], w[keep], cutoff=1.0)


def _exact_monic_recurrence(moments, n):
    """Gram-Schmidt recurrence from exact rational moments (independent of
    both the closed form and the Lanczos path)."""
    def inner(p, q):
        acc = Fraction(0)
        for i, a in enumerate(p):
            for j, b in enumerate(q):
                acc += a * b * moments[i + j]
        return acc

    def shift(p):
        return [Fraction(0)] + list(p)

    p_prev = [Fraction(1)]
    alphas, betas = [], []
    betas.append(moments[0])
    norm_prev = inner(p_prev, p_prev)
    alphas.append(inner(shift(p_prev), p_prev) / norm_prev)
    p_pp = None
    for k in range(1, n):
        p_new = shift(p_prev)
        p_new = [c - alphas[-1] * (p_prev[i] if i < len(p_prev) else 0) for i, c in enumerate(p_new)]
        if p_pp is not None:
            beta_k = norm_prev / inner(p_pp, p_pp)
            p_new = [c - beta_k * (p_pp[i] if i < len(p_pp) else 0) for i, c in enumerate(p_new)]
        norm_new = inner(p_new, p_new)
        betas.append(norm_new / norm_prev)
        alphas.append(inner(shift(p_new), p_new) / norm_new)
        p_pp, p_prev, norm_prev = p_prev, p_new, norm_new
    return alphas, betas


class TestJacobiOracleItself:
    @pytest.mark.parametrize("s", [0, 1, 3, 5])
    def test_against_exact_rational_arithmetic(self, s):
        moments = [Fraction(1, s + j + 1) for j in range(16)]
        alphas, betas = _exact_monic_recurrence(moments, 6)
        for n in range(6):
            a_ref, b_ref = oracles.jacobi_recurrence(s, n)
            assert a_ref == pytest.approx(float(alphas[n]), rel=1e-13)
            assert b_ref == pytest.approx(float(betas[n]), rel=1e-13)

    def test_textbook_legendre_values(self):
        assert oracles.jacobi_recurrence(0, 0) == (pytest.approx(0.5), pytest.approx(1.0))
        assert oracles.jacobi_recurrence(0, 1)[1] == pytest.approx(1 / 12)
        assert oracles.jacobi_recurrence(0, 2)[1] == pytest.approx(1 / 15)

    @pytest.mark.parametrize("s", [0.0, 1.0, 2.5, 5.0])
    def test_beta0_total_mass(self, s):
        assert oracles.jacobi_recurrence(s, 0)[1] == pytest.approx(1 / (s + 1))


class TestRecurrence:
    @pytest.mark.parametrize("s", [0, 1, 3, 5])
    def test_matches_shifted_jacobi(self, s):
        chain = recurrence_coefficients(_power_measure(s), 30)
        for n in range(30):
            a_ref, b_ref = oracles.jacobi_recurrence(s, n)
            assert chain.frequencies[n] == pytest.approx(a_ref, abs=1e-8)
            if n == 0:
                assert chain.system_coupling**2 == pytest.approx(b_ref, rel=1e-8)
            else:
                assert chain.hops[n - 1] ** 2 == pytest.approx(b_ref, rel=1e-8)

    def test_uniform_weight_sum(self):
        m = _power_measure(0, 64)
        assert m.total_weight == pytest.approx(1.0, abs=1e-12)

    def test_point_mass_recovers_mode(self):
        g = np.sqrt(0.22) * 180.0
        m = DiscretizedMeasure(np.array([180.0]), np.array([g**2]), cutoff=200.0)
        chain = recurrence_coefficients(m, 1)
        assert chain.length == 1
        assert chain.frequencies[0] == pytest.approx(180.0)
        assert chain.system_coupling == pytest.approx(g)

    def test_breakdown_reported_with_index(self):
        m = DiscretizedMeasure(np.array([1.0, 2.0]), np.array([0.5, 0.5]), cutoff=2.0)
        with pytest.raises((ChainBreakdownError, ValueError)):
            recurrence_coefficients(m, 5)


class TestDiscretize:
    def test_weight_sum_matches_adaptive_quadrature(self):
        bg = BackgroundSD()
        m = discretize(bg, 2048)
        ref, _ = integrate.quad(lambda w: eval_background(bg, w), 0, m.cutoff, limit=400)
        assert m.total_weight == pytest.approx(ref, rel=1e-8)

    def test_zero_background_rejected(self):
        with pytest.raises(ValueError):
            discretize(BackgroundSD(lam=0.0), 256)

    def test_small_cutoff_rejected(self):
        with pytest.raises(NumericsError, match="omega_max"):
            discretize(BackgroundSD(), 2048, omega_max=300.0)

    def test_empty_measure_rejected(self):
        with pytest.raises(ValueError):
            DiscretizedMeasure(np.array([]), np.array([]), cutoff=1.0)


class TestBackgroundChain:
    def test_c0_squared_is_total_density(self):
        bg = BackgroundSD()
        chain = map_background(bg, 30)
        ref, _ = integrate.quad(lambda w: eval_background(bg, w), 0, chain.cutoff, limit=400)
        assert chain.system_coupling**2 == pytest.approx(ref, rel=1e-8)

    def test_moment_consistency(self):
        bg = BackgroundSD()
        chain = map_background(bg, 30)
        measure = discretize(bg, max(64 * 30, 2048))
        nodes, weights = gauss_rule(chain)
        for k in range(60):
            ref = float(np.sum(measure.weights * measure.nodes**k))
            got = float(np.sum(weights * nodes**k))
            assert got == pytest.approx(ref, rel=1e-6)

    def test_stability_under_quadrature_doubling(self):
        bg = BackgroundSD()
        base = max(64 * 30, 2048)
        c1 = map_background(bg, 30, n_quad=base)
        c2 = map_background(bg, 30, n_quad=2 * base)
        assert np.abs(c1.frequencies - c2.frequencies).max() < 1e-9
        assert np.abs(c1.hops - c2.hops).max() < 1e-9

    def test_quadrature_floor_enforced(self):
        with pytest.raises(ValueError, match="4"):
            map_background(BackgroundSD(), 30, n_quad=100)

    def test_json_roundtrip(self):
        chain = map_background(BackgroundSD(), 12)
        again = ChainCoefficients.from_json(chain.to_json())
        assert np.array_equal(again.frequencies, chain.frequencies)
        assert np.array_equal(again.hops, chain.hops)
        assert again.system_coupling == chain.system_coupling


def test_lanczos_on_full_matrix_matches_dense_tridiagonal():
    rng = np.random.default_rng(3)
    mat = rng.normal(size=(12, 12))
    mat = 0.5 * (mat + mat.T)
    v = rng.normal(size=12)
    alpha, beta, q = lanczos_tridiagonalize(mat, v, 12)
    tri = np.diag(alpha) + np.diag(np.sqrt(beta[1:12]), 1) + np.diag(np.sqrt(beta[1:12]), -1)
    assert np.abs(np.sort(np.linalg.eigvalsh(tri)) - np.sort(np.linalg.eigvalsh(mat))).max() < 1e-8
    assert np.abs(q.T @ q - np.eye(12)).max() < 1e-10
    # seed maps to the first basis vector scaled by |v|
    assert np.allclose(q[:, 0] * np.sqrt(beta[0]), v)
