"""Exciton-vibration coherence dynamics in pigment-protein complexes.

Two simulation engines over a shared model layer: a semiclassical
mode-driven secular Redfield propagator with trajectory ensembles, and a
numerically exact finite-temperature chain-mapped MPS evolution, plus
independent oracles and a CLI for reproducible desk-scale experiments.
"""

from .spectral import (
    CONST,
    BackgroundSD,
    DiscreteMode,
    PhysConstants,
    SpectralDensity,
    reorganization_integral,
    thermal_occupation,
)
from .exciton import ExcitonBasis, SiteHamiltonian, build_dimer, coupling_coefficients, diagonalize

__all__ = [
    "CONST",
    "PhysConstants",
    "BackgroundSD",
    "DiscreteMode",
    "SpectralDensity",
    "reorganization_integral",
    "thermal_occupation",
    "SiteHamiltonian",
    "ExcitonBasis",
    "build_dimer",
    "diagonalize",
    "coupling_coefficients",
]

__version__ = "0.1.0"
