"""Site-basis Hamiltonians and the exciton (eigen)basis.

The electronic Hilbert space is spanned by the optical ground state |g> at
energy zero plus one singly-excited state |i> per chromophore.  |g> carries
no couplings, so diagonalisation acts on the single-excitation block only.
Basis ordering everywhere in the package: index 0 = |g>, indices 1..N = sites
or excitons (excitons sorted ascending in energy, e1 lowest).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError

_SYM_TOL = 1e-9


@dataclass(frozen=True)
class SiteHamiltonian:
    """Single-excitation electronic Hamiltonian: site energies and couplings."""

    epsilon: np.ndarray
    coupling: np.ndarray

    def __post_init__(self):
        eps = np.asarray(self.epsilon, dtype=float)
        j = np.asarray(self.coupling, dtype=float)
        if eps.ndim != 1 or j.shape != (eps.size, eps.size):
            raise ValueError("epsilon must be a vector and coupling an NxN matrix")
        if not np.allclose(j, j.T, atol=_SYM_TOL * max(1.0, np.abs(j).max())):
            raise ValueError("coupling matrix must be symmetric")
        if np.abs(np.diag(j)).max(initial=0.0) > _SYM_TOL:
            raise ValueError("coupling matrix must have zero diagonal")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "coupling", 0.5 * (j + j.T))

    @property
    def n_sites(self) -> int:
        return self.epsilon.size

    def single_excitation_matrix(self) -> np.ndarray:
        return np.diag(self.epsilon) + self.coupling

    def full_matrix(self) -> np.ndarray:
        """(N+1)x(N+1) Hamiltonian including the uncoupled ground level."""
        n = self.n_sites
        h = np.zeros((n + 1, n + 1))
        h[1:, 1:] = self.single_excitation_matrix()
        return h

    def shifted(self) -> "SiteHamiltonian":
        """Shift the excited manifold so site energies average to zero.

        A global offset of the excited block only rotates the phase of
        ground-excited coherences; magnitudes, populations and inter-exciton
        dynamics are unchanged, while integrators avoid optical frequencies.
        """
        return SiteHamiltonian(self.epsilon - self.epsilon.mean(), self.coupling)


def build_dimer(delta_eps: float, j12: float) -> SiteHamiltonian:
    """Two-site Hamiltonian with energy difference eps1 - eps2 = delta_eps."""
    eps = np.array([+0.5 * delta_eps, -0.5 * delta_eps])
    j = np.array([[0.0, j12], [j12, 0.0]])
    return SiteHamiltonian(eps, j)


@dataclass(frozen=True)
class ExcitonBasis:
    """Eigenpairs of the single-excitation block.

    ``energies`` ascend (e1 is the lowest excitation); ``coefficients`` holds
    C[n, i] = <i|e_n>, a real orthogonal matrix with the sign convention that
    each eigenvector's largest-magnitude component is positive.
    """

    energies: np.ndarray
    coefficients: np.ndarray
    degenerate: bool = False

    @property
    def n_excitons(self) -> int:
        return self.energies.size

    def gap(self, n: int, m: int) -> float:
        """E_n - E_m with 1-based exciton labels."""
        return float(self.energies[n - 1] - self.energies[m - 1])

    def rotation_with_ground(self) -> np.ndarray:
        """Orthogonal W with W[0,0]=1, W[1+i,1+n] = C[n,i].

        Columns are the basis vectors [|g>, |e1>, ...] expressed in the site
        basis, so rho_exc = W.T @ rho_site @ W.
        """
        n = self.n_excitons
        w = np.zeros((n + 1, n + 1))
        w[0, 0] = 1.0
        w[1:, 1:] = self.coefficients.T
        return w

    def state_in_site_basis(self, amplitudes) -> np.ndarray:
        """Map exciton-basis amplitudes [g, e1, ..] to the site basis."""
        return self.rotation_with_ground() @ np.asarray(amplitudes, dtype=complex)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    out = vectors.copy()
    for n in range(out.shape[1]):
        k = int(np.argmax(np.abs(out[:, n])))
        if out[k, n] < 0:
            out[:, n] = -out[:, n]
    return out


def diagonalize(h: SiteHamiltonian, degeneracy_tol: float = 1e-9) -> ExcitonBasis:
    """Real orthogonal eigendecomposition of the single-excitation block."""
    mat = h.single_excitation_matrix()
    energies, vectors = np.linalg.eigh(mat)
    vectors = _fix_signs(vectors)
    # Stable tie-break for exact degeneracies: lexicographic eigenvector order.
    order = sorted(
        range(energies.size),
        key=lambda n: (round(energies[n] / max(degeneracy_tol, 1e-300)), tuple(vectors[:, n])),
    )
    energies = energies[order]
    vectors = vectors[:, order]
    scale = max(1.0, np.abs(energies).max())
    degenerate = bool(np.any(np.diff(energies) < degeneracy_tol * scale))
    return ExcitonBasis(energies=energies, coefficients=vectors.T.copy(), degenerate=degenerate)


def coupling_coefficients(basis: ExcitonBasis) -> np.ndarray:
    """Exciton-basis environment structure factors K[i, n, m] = C_n^i C_m^i.

    K is symmetric in (n, m) and complete: sum_n K[i, n, n] = 1 per site.
    """
    c = basis.coefficients  # C[n, i]
    return np.einsum("ni,mi->inm", c, c)


def load_site_hamiltonian(path: str | Path) -> SiteHamiltonian:
    """Read a site Hamiltonian from a JSON file {epsilon_cm1, coupling_cm1}."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(
            f"site Hamiltonian file not found: {p}. Expected a JSON object "
            '{"epsilon_cm1": [..], "coupling_cm1": [[..], ..]} with energies in cm^-1.'
        )
    try:
        raw = json.loads(p.read_text())
        eps = np.asarray(raw["epsilon_cm1"], dtype=float)
        j = np.asarray(raw["coupling_cm1"], dtype=float)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"could not parse site Hamiltonian from {p}: {exc}") from exc
    try:
        return SiteHamiltonian(eps, j)
    except ValueError as exc:
        raise ConfigError(f"invalid site Hamiltonian in {p}: {exc}") from exc
