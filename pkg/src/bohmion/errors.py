"""Exception hierarchy shared by all bohmion modules.

The CLI maps these onto process exit codes: configuration problems exit
with 1, invariant-drift failures with 2, numerical failures with 3.
"""


class BohmionError(Exception):
    """Base class for all package errors."""


class ConfigurationError(BohmionError):
    """Invalid parameter, config file or grid/kernel combination."""


class DimensionError(BohmionError):
    """Array shapes or grids do not match."""


class DegenerateEnsembleError(BohmionError):
    """Particle ensemble with non-positive or all-zero weights."""


class StructureError(BohmionError):
    """A structural invariant is violated (Hermiticity, positivity, trace)."""


class NormalizationError(StructureError):
    """State norm or density normalization outside tolerance."""


class StepFailureError(BohmionError):
    """Implicit solve did not converge within the iteration budget."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class DomainError(BohmionError):
    """Particles left the region covered by the quadrature grid."""


class DiagnosticError(BohmionError):
    """Two independent evaluation routes disagree beyond tolerance."""


class InvariantViolation(BohmionError):
    """A monitored conservation law drifted past its declared tolerance."""

    def __init__(self, name: str, measured: float, tolerance: float):
        super().__init__(
            f"invariant '{name}' drifted to {measured:.3e} (tolerance {tolerance:.3e})"
        )
        self.name = name
        self.measured = measured
        self.tolerance = tolerance
