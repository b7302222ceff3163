"""Exception hierarchy shared by the solver modules and the CLI."""


class EulerError(Exception):
    """Base class for all package errors."""


class DomainError(EulerError, ValueError):
    """An input lies outside the domain of a formula (negative density, w < z, ...)."""


class ConfigError(EulerError, ValueError):
    """Invalid run parameters or malformed input files."""


class NumericalError(EulerError, RuntimeError):
    """A numerical procedure failed: root find stalled, too many positivity clamps."""


class ReconstructionError(NumericalError):
    """Velocity reconstruction from shifted invariants has no real root."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class DivergenceError(NumericalError):
    """Fixed-point iteration diverged; carries the residual history."""

    def __init__(self, message: str, history=None, report=None):
        super().__init__(message)
        self.history = list(history or [])
        self.report = report
