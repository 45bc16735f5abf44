"""Exception hierarchy shared by every nevlab module."""


class NevlabError(Exception):
    """Base class for all errors raised by nevlab."""


class DomainError(NevlabError, ValueError):
    """Input outside the domain of an operation (e.g. the pair (0, 0))."""


class PoleError(DomainError):
    """Evaluation requested at the pole of a Green function."""


class NumericError(NevlabError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class QuadratureError(NumericError):
    pass


class ContourZeroError(NumericError):
    """A zero of the tracked function sits on (or numerically at) the contour."""


class ConfigError(NevlabError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class CurvatureBoundError(NevlabError):
    pass


class InsufficientGrowthError(NumericError):
    pass
