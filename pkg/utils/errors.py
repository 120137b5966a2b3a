class SimulationError(Exception):
    """Base class for every failure the simulator reports to the caller."""

    exit_code = 1


class ConfigurationError(SimulationError):
    """Scenario or model parameters are inconsistent."""

    exit_code = 2


class DomainError(SimulationError):
    """An argument lies outside the domain of a model function."""

    exit_code = 2


class ContractViolation(SimulationError):
    """A caller broke a precondition (infeasible action, unreachable state, ...)."""

    exit_code = 1


class QuantizationError(SimulationError):
    """Grid initialization or training could not proceed."""

    exit_code = 3


class NumericalError(SimulationError):
    """A matrix factorization or covariance check failed."""

    exit_code = 3


class FilterDivergenceError(NumericalError):
    """The unscented filter produced a singular innovation covariance."""


class DegenerateGeometryError(NumericalError):
    """Target and observer coincide horizontally."""


class OutputError(SimulationError):
    """An artifact could not be written or read."""

    exit_code = 4


class RunAborted(FilterDivergenceError):
    """The closed loop stopped early; `log` holds the records up to the failure."""

    def __init__(self, message: str, log=None):
        super().__init__(message)
        self.log = log
