"""Orthogonal-polynomial chain mapping of a smooth spectral density.

The continuum background J0(w) dw is discretised by composite Gauss-Legendre
quadrature and tridiagonalised by a Lanczos recursion (mathematically the
Stieltjes procedure for the monic orthogonal polynomials of the measure,
executed with full reorthogonalisation in extended precision).  The result is
a semi-infinite nearest-neighbour oscillator chain: site energies alpha_n,
hops t_n = sqrt(beta_{n+1}) and a system coupling c0 = sqrt(beta_0) with
c0^2 = int J0 dw.

Discrete modes are *not* folded into the measure here; they are attached as
explicit oscillators by the network assembly (see tedopa module).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ChainBreakdownError, NumericsError
from .spectral import BackgroundSD, background_total, eval_background, spectral_cutoff


@dataclass(frozen=True)
class DiscretizedMeasure:
    """Positive quadrature rule (nodes, weights) approximating J0(w) dw."""

    nodes: np.ndarray
    weights: np.ndarray
    cutoff: float

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if x.ndim != 1 or x.shape != w.shape:
            raise ValueError("nodes and weights must be matching vectors")
        if x.size == 0:
            raise ValueError("empty measure")
        if np.any(np.diff(x) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if np.any(x <= 0) or np.any(w <= 0):
            raise ValueError("nodes and weights must be positive")
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "weights", w)

    @property
    def n_quad(self) -> int:
        return self.nodes.size

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())


def discretize(
    background: BackgroundSD,
    n_quad: int,
    omega_max: float | None = None,
    tail_tol: float = 1e-6,
) -> DiscretizedMeasure:
    """Composite Gauss-Legendre discretisation of J0(w) dw on (0, omega_max].

    Panels are spaced geometrically towards zero so both the w^5 onset and
    the stretched-exponential tail are resolved.  Raises if the neglected
    tail of int J0/w above the cutoff exceeds ``tail_tol * lam``.
    """
    if background.lam <= 0:
        raise ValueError("cannot discretise a zero background density")
    if omega_max is None:
        omega_max = spectral_cutoff(background, tol=tail_tol)
    else:
        from .spectral import _quad  # shared cutoff policy

        tail, _ = _quad(
            lambda w: eval_background(background, w) / w, omega_max, np.inf, limit=200
        )
        if tail > tail_tol * background.lam:
            raise NumericsError(
                f"tail of the reorganisation integral above omega_max={omega_max} is "
                f"{tail:.3e} cm^-1 (> {tail_tol:.0e} * lam); increase omega_max"
            )

    pts_per_panel = 16
    n_panels = max(8, int(np.ceil(n_quad / pts_per_panel)))
    # geometric edges from ~1e-5 * omega_max up to omega_max, plus [0, first].
    ratio = (1e-5) ** (1.0 / (n_panels - 1))
    edges = omega_max * ratio ** np.arange(n_panels - 1, -1, -1)
    edges = np.concatenate(([0.0], edges))
    gx, gw = np.polynomial.legendre.leggauss(pts_per_panel)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        x = a + half * (gx + 1.0)
        nodes.append(x)
        weights.append(half * gw * eval_background(background, x))
    x = np.concatenate(nodes)
    w = np.concatenate(weights)
    keep = w > 0
    return DiscretizedMeasure(nodes=x[keep], weights=w[keep], cutoff=omega_max)


@dataclass(frozen=True)
class ChainCoefficients:
    """Tridiagonal chain representation of a bath measure.

    ``frequencies`` are the chain-site energies (cm^-1), ``hops`` the
    nearest-neighbour couplings and ``system_coupling`` the coupling c0 of
    the chain entry site to the system.
    """

    frequencies: np.ndarray
    hops: np.ndarray
    system_coupling: float
    cutoff: float = 0.0
    n_quad: int = 0

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        h = np.asarray(self.hops, dtype=float)
        if h.size != max(f.size - 1, 0):
            raise ValueError("need exactly len(frequencies) - 1 hops")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "hops", h)

    @property
    def length(self) -> int:
        return self.frequencies.size

    def jacobi_matrix(self) -> np.ndarray:
        m = np.diag(self.frequencies)
        if self.hops.size:
            m += np.diag(self.hops, 1) + np.diag(self.hops, -1)
        return m

    def flatness(self) -> float:
        """Relative spread of the trailing third of the coefficients; a
        diagnostic for convergence towards the asymptotic chain."""
        tail = self.frequencies[-max(2, self.length // 3):]
        return float(tail.std() / tail.mean()) if tail.mean() else float("inf")

    def to_json(self) -> str:
        return json.dumps(
            {
                "frequencies_cm1": self.frequencies.tolist(),
                "hops_cm1": self.hops.tolist(),
                "system_coupling_cm1": self.system_coupling,
                "cutoff_cm1": self.cutoff,
                "n_quad": self.n_quad,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ChainCoefficients":
        raw = json.loads(text)
        return cls(
            frequencies=np.array(raw["frequencies_cm1"]),
            hops=np.array(raw["hops_cm1"]),
            system_coupling=raw["system_coupling_cm1"],
            cutoff=raw.get("cutoff_cm1", 0.0),
            n_quad=raw.get("n_quad", 0),
        )


def cache_key(background: BackgroundSD, n_chain: int, omega_max: float) -> str:
    payload = json.dumps(
        [background.lam, background.omega_a, background.omega_b,
         background.w1, background.w2, n_chain, omega_max]
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def lanczos_tridiagonalize(matrix_diag_or_full, start: np.ndarray, n: int):
    """Lanczos recursion with full reorthogonalisation.

    ``matrix_diag_or_full`` is either a 1-D array (diagonal matrix, the
    discretised-measure case) or a full symmetric matrix.  ``start`` is the
    unnormalised seed vector.  Returns (alpha[n], beta[n+1], basis Q) where
    beta[0] = |start|^2 and columns of Q are the Lanczos vectors.

    The recursion is run in extended precision (longdouble) because the
    underlying Stieltjes procedure is ill-conditioned.
    """
    start = np.asarray(start, dtype=np.longdouble)
    mat = np.asarray(matrix_diag_or_full, dtype=np.longdouble)
    apply = (lambda v: mat * v) if mat.ndim == 1 else (lambda v: mat @ v)
    dim = start.size
    if n > dim:
        raise ValueError(f"cannot build {n} chain sites from a rank-{dim} measure")
    beta0 = float(start @ start)
    if beta0 <= 0:
        raise ChainBreakdownError(0, beta0)
    q = np.zeros((dim, n), dtype=np.longdouble)
    alpha = np.zeros(n, dtype=np.longdouble)
    beta = np.zeros(n + 1, dtype=np.longdouble)
    beta[0] = beta0
    q[:, 0] = start / np.sqrt(beta[0])
    scale = float(np.abs(mat).max())
    for k in range(n):
        z = apply(q[:, k])
        alpha[k] = q[:, k] @ z
        z = z - alpha[k] * q[:, k]
        if k > 0:
            z = z - np.sqrt(beta[k]) * q[:, k - 1]
        # full reorthogonalisation, twice for safety
        for _ in range(2):
            z = z - q[:, : k + 1] @ (q[:, : k + 1].T @ z)
        b = float(z @ z)
        beta[k + 1] = b
        if k + 1 < n:
            if b <= (1e-28 * scale) ** 2 * dim or not np.isfinite(b):
                raise ChainBreakdownError(k + 1, b)
            q[:, k + 1] = z / np.sqrt(beta[k + 1])
    return (
        np.asarray(alpha, dtype=float),
        np.asarray(beta, dtype=float),
        np.asarray(q, dtype=float),
    )


def recurrence_coefficients(measure: DiscretizedMeasure, n_chain: int) -> ChainCoefficients:
    """Chain coefficients of the measure: omega_n = alpha_n, t_n = sqrt(beta_{n+1}),
    c0 = sqrt(beta_0)."""
    if n_chain < 1:
        raise ValueError("chain length must be at least 1")
    alpha, beta, _ = lanczos_tridiagonalize(
        measure.nodes, np.sqrt(measure.weights), n_chain
    )
    if np.any(beta[:n_chain] <= 0):
        idx = int(np.argmax(beta[:n_chain] <= 0))
        raise ChainBreakdownError(idx, float(beta[idx]))
    return ChainCoefficients(
        frequencies=alpha,
        hops=np.sqrt(beta[1:n_chain]),
        system_coupling=float(np.sqrt(beta[0])),
        cutoff=measure.cutoff,
        n_quad=measure.n_quad,
    )


def map_background(
    background: BackgroundSD,
    n_chain: int,
    n_quad: int | None = None,
    omega_max: float | None = None,
) -> ChainCoefficients:
    """Convenience wrapper: discretise and tridiagonalise in one call.

    The default quadrature size is far above the 4 * n_chain floor: the
    trailing coefficients converge only once the rule stops being felt as a
    discrete measure (empirically ~2000 nodes for the default background).
    """
    if n_quad is None:
        n_quad = max(64 * n_chain, 2048)
    if n_quad < 4 * n_chain:
        raise ValueError("n_quad must be at least 4 * n_chain")
    measure = discretize(background, n_quad, omega_max=omega_max)
    chain = recurrence_coefficients(measure, n_chain)
    # consistency: c0^2 must reproduce the integrated density on [0, cutoff]
    # (the chain represents the cutoff measure; the neglected tail is bounded
    # by the cutoff policy).
    from .spectral import _quad

    total, _ = _quad(lambda w: eval_background(background, w), 0.0, measure.cutoff, limit=400)
    if abs(chain.system_coupling**2 - total) > 1e-7 * total:
        raise NumericsError(
            "discretised measure does not reproduce int J0 dw; "
            f"got {chain.system_coupling**2:.8e} vs {total:.8e}"
        )
    return chain


def gauss_rule(chain: ChainCoefficients) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule of the chain's spectral measure via its Jacobi matrix.

    Nodes are the eigenvalues; weights are beta_0 times the squared first
    components of the eigenvectors.  Used by the moment-consistency checks.
    """
    evals, vecs = np.linalg.eigh(chain.jacobi_matrix())
    weights = chain.system_coupling**2 * vecs[0, :] ** 2
    return evals, weights
