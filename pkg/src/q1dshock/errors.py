"""Exception hierarchy shared by all modules."""


class Q1DError(Exception):
    """Base class for every error raised by the package."""


class NonPositiveDensity(Q1DError, ValueError):
    pass


class OutOfDomain(Q1DError, ValueError):
    pass


class InvalidNozzle(Q1DError, ValueError):
    pass


class SonicSingularity(Q1DError):
    """The steady ODE hit the sonic guard |c^2 - u^2| < tol * c^2."""


class NoSubsonicRoot(Q1DError):
    pass


class BracketFailure(Q1DError):
    pass


class NoShockPosition(Q1DError):
    """No admissible shock position reproduces the outflow density.

    ``non_unique`` is set when the shooting residual is flat, which happens
    for a straight duct where any shock position is admissible.
    """

    def __init__(self, message, non_unique=False):
        super().__init__(message)
        self.non_unique = non_unique


class RegimeViolation(Q1DError):
    pass


class VacuumFormed(Q1DError):
    pass


class RHRepairFailed(Q1DError):
    pass


class ShockLost(Q1DError):
    pass


class MultipleShocks(Q1DError):
    pass


class FitWindowEmpty(Q1DError):
    pass


class StabilityViolation(Q1DError):
    pass


class NoConvergence(Q1DError):
    pass


class ConfigError(Q1DError, ValueError):
    pass
