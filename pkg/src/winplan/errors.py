"""Exception hierarchy. ``exit_code`` is what the CLI returns for each class."""


class WinPlanError(Exception):
    exit_code = 1


class ConfigError(WinPlanError, ValueError):
    """Invalid design input. ``path`` is a JSON pointer when known."""

    exit_code = 1

    def __init__(self, message, path=None):
        self.path = path
        if path is not None:
            message = f"{path}: {message}"
        super().__init__(message)


class InvalidMarginal(ConfigError):
    pass


class IncompatibleEffect(ConfigError):
    pass


class ProbabilityOutOfRange(ConfigError):
    pass


class MissingFollowUp(ConfigError):
    pass


class NonPositiveDefiniteCorrelation(ConfigError):
    pass


class InvalidDimension(ConfigError):
    pass


class DomainError(WinPlanError, ValueError):
    exit_code = 1


class NumericError(WinPlanError, ArithmeticError):
    exit_code = 2


class EmptySample(NumericError):
    pass


class SampleTooSmall(NumericError):
    pass


class DegenerateMeasure(NumericError):
    def __init__(self, measure, message=None):
        self.measure = measure
        super().__init__(message or f"{measure} is undefined for these plug-in values")


class ZeroEffect(NumericError):
    pass


class NoSolution(NumericError):
    pass


class AllTied(NumericError):
    pass


class NoEvaluablePairs(NumericError):
    pass


class NonPDTrajectory(NumericError):
    def __init__(self, message, matrix=None):
        self.matrix = matrix
        super().__init__(message)
