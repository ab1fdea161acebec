"""Independent brute-force and closed-form references.

Everything here is a verification aid: dense exact diagonalisation of small
electron-oscillator models, the exactly solvable independent-boson
decoherence function, closed-form Jacobi recurrence coefficients and the
closed-form dimer eigensystem.  Clarity over speed; dimensions are capped so
every reference run stays at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import NumericsError
from .exciton import SiteHamiltonian
from .spectral import KB_CM1_PER_K, RAD_PS_PER_CM1, BackgroundSD, eval_background

MAX_DENSE_DIM = 4096


# ---------------------------------------------------------------------------
# Closed-form dimer diagonalisation
# ---------------------------------------------------------------------------

def dimer_eigensystem(delta_eps: float, j12: float):
    """Closed-form 2x2 eigensystem for a dimer with eps1 - eps2 = delta_eps.

    Returns (gap, theta, c1, c2): the exciton splitting, the mixing angle
    theta = arctan(2 J / delta) / 2 and the two eigenvectors (lowest first)
    in the site basis, sign-fixed so the largest component is positive.
    """
    gap = math.hypot(delta_eps, 2.0 * j12)
    theta = 0.5 * math.atan2(2.0 * j12, delta_eps)
    # For eps = (+d/2, -d/2): the lower state leans on site 2.
    lower = np.array([-math.sin(theta), math.cos(theta)])
    upper = np.array([math.cos(theta), math.sin(theta)])
    for v in (lower, upper):
        if v[np.argmax(np.abs(v))] < 0:
            v *= -1.0
    return gap, theta, lower, upper


# ---------------------------------------------------------------------------
# Shifted-Jacobi recurrence coefficients (chain-mapping oracle)
# ---------------------------------------------------------------------------

def jacobi_recurrence(s: float, n: int):
    """Monic recurrence coefficients (alpha_n, beta_n) for weight w^s on [0,1].

    beta_0 is the total mass 1/(s+1).  Derived from the standard Jacobi
    (a=0, b=s) recurrence on [-1,1] shifted to [0,1].
    """
    if s <= -1:
        raise ValueError("weight exponent must satisfy s > -1")
    if n < 0:
        raise ValueError("index must be non-negative")
    if n == 0:
        alpha = (s + 1.0) / (s + 2.0)
        beta = 1.0 / (s + 1.0)
        return alpha, beta
    nab = 2.0 * n + s
    alpha = 0.5 * (s * s / (nab * (nab + 2.0)) + 1.0)
    beta = (n * n * (n + s) ** 2) / (nab**2 * (nab + 1.0) * (nab - 1.0))
    return alpha, beta


# ---------------------------------------------------------------------------
# Independent-boson (pure dephasing) decoherence function
# ---------------------------------------------------------------------------

def _as_density(sd) -> callable:
    if isinstance(sd, BackgroundSD):
        return lambda w: eval_background(sd, w)
    if callable(sd):
        return sd
    raise TypeError("expected a BackgroundSD or a callable J(omega)")


def decoherence_exponent(sd, temperature: float, t, omega_max: float = 6000.0):
    """G(t) = int dw J(w) coth(w/2kBT) (1 - cos(w t)) / w^2 (dimensionless).

    ``t`` in ps; frequencies in cm^-1 (the angular conversion is internal).
    The (1 - cos) factor is split into a static and an oscillatory quadrature
    so large times stay accurate.
    """
    j = _as_density(sd)

    def coth_factor(w):
        if temperature == 0.0:
            return np.ones_like(w)
        with np.errstate(divide="ignore"):
            return 1.0 / np.tanh(w / (2.0 * KB_CM1_PER_K * temperature))

    def static_part(w):
        w = np.atleast_1d(np.asarray(w, dtype=float))
        with np.errstate(invalid="ignore"):
            val = np.where(w > 0, j(w) * coth_factor(w) / np.maximum(w, 1e-300) ** 2, 0.0)
        return val if val.size > 1 else float(val[0])

    static, _ = integrate.quad(static_part, 0.0, omega_max, limit=400)

    def one_time(ti: float) -> float:
        if ti == 0.0:
            return 0.0
        osc, _ = integrate.quad(
            static_part, 0.0, omega_max,
            weight="cos", wvar=RAD_PS_PER_CM1 * ti, limit=400,
        )
        return static - osc

    if np.ndim(t) == 0:
        return one_time(float(t))
    return np.array([one_time(float(ti)) for ti in np.asarray(t, dtype=float)])


def independent_boson_coherence(sd, temperature: float, kappa: float, t, omega_max: float = 6000.0):
    """|rho(t)| / |rho(0)| = exp(-kappa * G(t)) for pure dephasing."""
    g = decoherence_exponent(sd, temperature, t, omega_max=omega_max)
    return np.exp(-kappa * g)


# ---------------------------------------------------------------------------
# Dense exact diagonalisation of electron + a few oscillators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DenseOscillator:
    """One truncated oscillator coupled to electronic site ``site`` (1-based)."""

    site: int
    omega: float
    coupling: float
    dim: int


@dataclass
class DenseModel:
    """Full Hilbert-space Hamiltonian of the electronic block and oscillators."""

    hamiltonian: np.ndarray
    electronic_dim: int
    oscillators: tuple[DenseOscillator, ...]

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


def _osc_ops(d: int):
    a = np.diag(np.sqrt(np.arange(1, d)), k=1)
    return a, a.T.copy()


def build_dense_model(h_site: SiteHamiltonian, oscillators) -> DenseModel:
    """Assemble H = H_el + sum_k [w_k n_k + g_k |i_k><i_k| (a_k + a_k^dag)].

    ``oscillators`` is an iterable of DenseOscillator; electronic basis is
    [|g>, |1>, .., |N>].
    """
    oscillators = tuple(oscillators)
    m = h_site.n_sites + 1
    dims = [m] + [o.dim for o in oscillators]
    total = int(np.prod(dims))
    if total > MAX_DENSE_DIM:
        raise ValueError(f"dense model dimension {total} exceeds cap {MAX_DENSE_DIM}")

    def embed(op: np.ndarray, which: int) -> np.ndarray:
        mats = [np.eye(d) for d in dims]
        mats[which] = op
        out = mats[0]
        for mat in mats[1:]:
            out = np.kron(out, mat)
        return out

    h = embed(h_site.full_matrix(), 0)
    for k, osc in enumerate(oscillators):
        a, adag = _osc_ops(osc.dim)
        h += osc.omega * embed(adag @ a, 1 + k)
        proj = np.zeros((m, m))
        proj[osc.site, osc.site] = 1.0
        h += osc.coupling * embed(proj, 0) @ embed(a + adag, 1 + k)
    return DenseModel(hamiltonian=h, electronic_dim=m, oscillators=oscillators)


def dense_thermal_state(model: DenseModel, rho_electronic: np.ndarray, temperature: float) -> np.ndarray:
    """rho(0) = rho_el (x) product of truncated Boltzmann oscillator states."""
    rho = np.asarray(rho_electronic, dtype=complex)
    if rho.shape != (model.electronic_dim,) * 2:
        raise ValueError("electronic density matrix has the wrong shape")
    for osc in model.oscillators:
        if temperature == 0.0:
            p = np.zeros(osc.dim)
            p[0] = 1.0
        else:
            p = np.exp(-np.arange(osc.dim) * osc.omega / (KB_CM1_PER_K * temperature))
            p /= p.sum()
        rho = np.kron(rho, np.diag(p).astype(complex))
    return rho


def dense_evolve(model: DenseModel, rho0: np.ndarray, t_grid) -> np.ndarray:
    """Exact unitary evolution; returns the reduced electronic density matrix
    on ``t_grid`` (ps) as an array of shape (len(t_grid), M, M)."""
    t_grid = np.asarray(t_grid, dtype=float)
    if rho0.shape != model.hamiltonian.shape:
        raise ValueError("initial state dimension mismatch")
    evals, vecs = np.linalg.eigh(model.hamiltonian)
    rho_eig = vecs.conj().T @ rho0 @ vecs
    osc_dims = [o.dim for o in model.oscillators]
    m = model.electronic_dim
    shape = [m] + osc_dims
    out = np.empty((t_grid.size, m, m), dtype=complex)
    for idx, t in enumerate(t_grid):
        phases = np.exp(-1j * RAD_PS_PER_CM1 * evals * t)
        rho_t = vecs @ (np.outer(phases, phases.conj()) * rho_eig) @ vecs.conj().T
        full = rho_t.reshape(shape + shape)
        red = full
        # trace out oscillators from the last axis pair inward
        for _ in osc_dims:
            n_ax = red.ndim // 2
            red = np.trace(red, axis1=n_ax - 1, axis2=2 * n_ax - 1)
        out[idx] = red
    tr = np.trace(out[-1]).real
    if abs(tr - np.trace(rho0).real) > 1e-8:
        raise NumericsError(f"dense evolution lost trace: {tr}")
    return out


def dense_energy(model: DenseModel, rho: np.ndarray) -> float:
    return float(np.trace(model.hamiltonian @ rho).real)
