"""Exception hierarchy for the lipfrag package."""


class LipfragError(Exception):
    """Base class for all package errors."""


class ConfigurationError(LipfragError, ValueError):
    """Invalid physical or numerical configuration (bad parameters, bad config file)."""


class DomainError(LipfragError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class NumericalError(LipfragError, RuntimeError):
    """Fatal numerical failure (non-SPD system, NaN/Inf in state vectors)."""


class NonConvergenceError(NumericalError):
    """An iterative solver hit its iteration cap without reaching tolerance.

    Carries the residual reached so the failure can be diagnosed.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (achieved residual {residual:.3e})")
        self.residual = residual
