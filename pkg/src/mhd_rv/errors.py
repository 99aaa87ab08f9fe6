"""Exception hierarchy shared by all solver components."""


class MhdError(Exception):
    """Base class for all solver errors."""


class ConfigurationError(MhdError):
    """Invalid or inconsistent user-supplied configuration."""


class GeometryError(MhdError):
    """Degenerate or inconsistent mesh geometry."""


class PairingError(MhdError):
    """Periodic boundary traces do not match."""


class AssemblyError(MhdError):
    """Failure while assembling a discrete operator."""


class SolverError(MhdError):
    """Iterative solver failure. Carries the final residual."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class PositivityError(MhdError):
    """Density or internal energy lost positivity.

    ``where`` identifies the offending nodes (global DOF indices),
    ``stage`` the Runge-Kutta stage if the fault happened inside a step.
    """

    def __init__(self, message, where=None, stage=None, time=None):
        super().__init__(message)
        self.where = where
        self.stage = stage
        self.time = time


class ContractViolation(MhdError):
    """A caller broke an operation's preconditions."""
