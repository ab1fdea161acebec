"""Spectral densities, unit constants and thermal statistics.

Conventions used throughout the package: energies and frequencies are stored
in wavenumbers (cm^-1), time in picoseconds, temperature in kelvin.  The
conversion to angular frequency (rad/ps) happens only inside propagators via
``RAD_PS_PER_CM1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import NumericsError

# Speed of light in cm/ps; k_B/(hc) in cm^-1/K (CODATA).
C_CM_PER_PS = 2.99792458e-2
KB_CM1_PER_K = 0.6950348004
RAD_PS_PER_CM1 = 2.0 * math.pi * C_CM_PER_PS

FACT9 = math.factorial(9)


@dataclass(frozen=True)
class PhysConstants:
    """Unit-conversion constants in the cm^-1 / ps / K system."""

    kB: float = KB_CM1_PER_K
    omega_per_wavenumber: float = RAD_PS_PER_CM1


CONST = PhysConstants()


@dataclass(frozen=True)
class BackgroundSD:
    """Smooth super-Ohmic background spectral density.

    J0(w) = lam * (w1 * w^5 * exp(-sqrt(w/omega_a))
                   + w2 * w^5 * exp(-sqrt(w/omega_b)))
            / (9! * (w1 * omega_a^5 + w2 * omega_b^5))

    The normalisation makes the reorganisation-type integral exact:
    integral of J0(w)/w over [0, inf) equals 2*lam for any weights,
    because each term reduces to 2 * 9! * omega^5 under w = omega*x^2.
    """

    lam: float = 35.0
    omega_a: float = 0.57
    omega_b: float = 1.9
    w1: float = 1000.0
    w2: float = 4.3

    def __post_init__(self):
        if self.omega_a <= 0 or self.omega_b <= 0:
            raise ValueError("cutoff frequencies omega_a, omega_b must be positive")
        if self.lam < 0:
            raise ValueError("reorganisation scale lam must be non-negative")

    @property
    def _norm(self) -> float:
        return FACT9 * (self.w1 * self.omega_a**5 + self.w2 * self.omega_b**5)

    def __call__(self, omega):
        return eval_background(self, omega)


def eval_background(sd: BackgroundSD, omega):
    """Evaluate the background spectral density at ``omega`` (cm^-1).

    Accepts scalars or arrays; raises for negative frequencies.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValueError("spectral density is defined for omega >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (
            sd.lam
            * (
                sd.w1 * w**5 * np.exp(-np.sqrt(w / sd.omega_a))
                + sd.w2 * w**5 * np.exp(-np.sqrt(w / sd.omega_b))
            )
            / sd._norm
        )
    val = np.where(w == 0.0, 0.0, val)
    if np.isscalar(omega) or np.ndim(omega) == 0:
        return float(val)
    return val


@dataclass(frozen=True)
class DiscreteMode:
    """Sharp vibrational mode with Huang-Rhys coupling.

    ``damping_time`` (ps) is a phenomenological dephasing time used only by
    the semiclassical engine; the exact engine keeps modes undamped.
    """

    omega: float
    huang_rhys: float
    damping_time: float = 1.0

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("mode frequency must be positive")
        if self.huang_rhys < 0:
            raise ValueError("Huang-Rhys factor must be non-negative")
        if self.damping_time <= 0:
            raise ValueError("damping time must be positive")

    @property
    def coupling(self) -> float:
        """Linear coupling g = sqrt(S) * omega (cm^-1)."""
        return math.sqrt(self.huang_rhys) * self.omega


@dataclass(frozen=True)
class SpectralDensity:
    """Full environment description: smooth background plus discrete modes."""

    background: BackgroundSD | None = field(default_factory=BackgroundSD)
    modes: tuple[DiscreteMode, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        freqs = [m.omega for m in self.modes]
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError("mode frequencies must be strictly increasing and distinct")

    @classmethod
    def fmo_default(cls) -> "SpectralDensity":
        """Canonical parameters: lam=35 cm^-1 background plus the 37 cm^-1
        (S=0.12) and 180 cm^-1 (S=0.22) modes."""
        return cls(
            background=BackgroundSD(),
            modes=(DiscreteMode(37.0, 0.12), DiscreteMode(180.0, 0.22)),
        )

    def without_mode(self, omega: float) -> "SpectralDensity":
        kept = tuple(m for m in self.modes if m.omega != omega)
        return SpectralDensity(background=self.background, modes=kept)


def _quad(f, a, b, **kw):
    out = integrate.quad(f, a, b, full_output=1, **kw)
    if len(out) > 3:
        raise NumericsError(f"quadrature failed on [{a}, {b}]: {out[3]}")
    return out[0], out[1]


def spectral_cutoff(bg: BackgroundSD, tol: float = 1e-6) -> float:
    """Upper cutoff omega_max such that the tail of int J0/dw / w is below
    tol * lam.  The background has stretched-exponential tails and no natural
    cutoff, so the cutoff is found by bisection-free doubling."""
    if bg.lam == 0:
        return 1.0
    target = tol * bg.lam
    omega_max = 1000.0
    for _ in range(40):
        tail, _ = _quad(lambda w: eval_background(bg, w) / w, omega_max, np.inf, limit=200)
        if tail < target:
            return omega_max
        omega_max *= 1.3
    raise NumericsError("could not locate a spectral cutoff; tail does not decay")


def background_reorganization(bg: BackgroundSD, omega_max: float | None = None) -> float:
    """int_0^inf J0(w)/w dw by adaptive quadrature (closed form: 2*lam)."""
    if bg.lam == 0:
        return 0.0
    if omega_max is None:
        omega_max = spectral_cutoff(bg)
    val, _ = _quad(lambda w: eval_background(bg, w) / w, 0.0, omega_max, limit=400)
    tail, _ = _quad(lambda w: eval_background(bg, w) / w, omega_max, np.inf, limit=200)
    return val + tail


def background_total(bg: BackgroundSD, omega_max: float | None = None) -> float:
    """int_0^inf J0(w) dw, the squared system-chain coupling c0^2."""
    if bg.lam == 0:
        return 0.0
    if omega_max is None:
        omega_max = spectral_cutoff(bg)
    val, _ = _quad(lambda w: eval_background(bg, w), 0.0, omega_max, limit=400)
    tail, _ = _quad(lambda w: eval_background(bg, w), omega_max, np.inf, limit=200)
    return val + tail


def reorganization_integral(sd: SpectralDensity) -> float:
    """Total reorganisation-type integral int J(w)/w dw in cm^-1.

    The discrete modes contribute S_k * omega_k each (delta terms
    S_k omega_k^2 delta(w - omega_k) divided by w).
    """
    total = 0.0
    if sd.background is not None:
        total += background_reorganization(sd.background)
    total += sum(m.huang_rhys * m.omega for m in sd.modes)
    return total


def thermal_occupation(omega: float, temperature: float) -> float:
    """Bose occupation n(w) = 1/(exp(w/kB T) - 1); zero at T = 0."""
    if omega <= 0:
        raise ValueError("thermal occupation requires omega > 0")
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    if temperature == 0.0:
        return 0.0
    x = omega / (KB_CM1_PER_K * temperature)
    if x > 700.0:  # expm1 overflows; n = e^-x to double precision
        return math.exp(-x)
    return 1.0 / math.expm1(x)


def thermal_variance(omega: float, temperature: float) -> float:
    """Quantum thermal variance of (a + a^dag): coth(w / 2 kB T).

    Equals 1 at T = 0 (vacuum fluctuation) and 2n(w)+1 in general.
    """
    if omega <= 0:
        raise ValueError("thermal variance requires omega > 0")
    if temperature == 0.0:
        return 1.0
    x = omega / (2.0 * KB_CM1_PER_K * temperature)
    return 1.0 / math.tanh(x)


def sample_thermal_mode(mode: DiscreteMode, temperature: float, rng: np.random.Generator, size=None):
    """Draw initial displacement X and momentum p for a discrete mode.

    Both are independent zero-mean Gaussians with the quantum thermal
    variance coth(w/2kBT), which reproduces the vacuum width at T = 0.
    """
    sigma = math.sqrt(thermal_variance(mode.omega, temperature))
    x = rng.normal(0.0, sigma, size=size)
    p = rng.normal(0.0, sigma, size=size)
    return x, p
