"""Exception types shared across the package."""


class IonparError(Exception):
    """Base class for all package errors."""


class ValidationError(IonparError):
    """Invalid input: bad configuration, malformed file, broken precondition."""


class SolverError(IonparError):
    """Iterative solver failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ChainInstabilityError(IonparError):
    """Chain configuration is mechanically unstable (non-positive mode frequency)."""


class DesignError(IonparError):
    """Pulse design is infeasible for the requested parameters."""


class PowerLimitError(DesignError):
    """Designed amplitudes exceed the configured Rabi-frequency budget."""


class FockLeakageError(IonparError):
    """Population leaked into the top Fock level beyond the configured bound."""

    def __init__(self, message, leakage=None, mode=None):
        super().__init__(message)
        self.leakage = leakage
        self.mode = mode


class AlignmentError(IonparError):
    """Pulse schedules are not time-aligned."""


class ConvergenceError(IonparError):
    """Numerical result failed a convergence check."""
