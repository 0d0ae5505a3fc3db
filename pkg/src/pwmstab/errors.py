"""Exception hierarchy shared across the package."""


class PwmStabError(Exception):
    """Base class for all errors raised by pwmstab."""


class DimensionError(PwmStabError, ValueError):
    pass


class NumericError(PwmStabError, ValueError):
    pass


class ConvergenceError(PwmStabError, RuntimeError):
    pass


class SingularJacobianError(ConvergenceError):
    pass


class BracketError(PwmStabError, ValueError):
    pass


class ValidationError(PwmStabError, ValueError):
    """Invalid physical or configuration parameter.

    ``field`` names the offending parameter so callers can report it.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class OrbitNotFoundError(ConvergenceError):
    pass


class DegenerateOrbitError(PwmStabError):
    """The switching is not transversal: F x'(d-) + m_c vanishes."""


class MultiPulseError(PwmStabError):
    """The on-stage trajectory meets the threshold before the solved d."""


class ProbeSaturatedError(PwmStabError):
    pass


class ConfigError(PwmStabError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
