"""Exception hierarchy shared across the package."""


class PpcsimError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(PpcsimError):
    """Malformed or inconsistent run configuration."""


class NumericsError(PpcsimError):
    """A numerical procedure failed to converge or produced invalid output."""


class DegenerateSpectrumError(PpcsimError):
    """Degenerate exciton energies: the secular Redfield treatment is invalid.

    Use a non-secular method or lift the degeneracy before building rates.
    """


class ChainBreakdownError(NumericsError):
    """Loss of positivity in the orthogonal-polynomial recurrence."""

    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(
            f"recurrence coefficient beta[{index}] = {value:.3e} is not positive; "
            "increase quadrature resolution or reduce the chain length"
        )


class LayoutError(PpcsimError):
    """A Hamiltonian term violates the nearest-neighbour network layout."""


class TruncationError(NumericsError):
    """MPS truncation exceeded the configured hard limit."""

    def __init__(self, message: str, step: int | None = None, bond: int | None = None):
        self.step = step
        self.bond = bond
        super().__init__(message)


class IntegrationError(NumericsError):
    """Trajectory integration failed (non-finite state or step underflow)."""

    def __init__(self, message: str, trajectory: int | None = None):
        self.trajectory = trajectory
        super().__init__(message)


class InsufficientDataError(PpcsimError):
    """Not enough data points for the requested fit or estimate."""
