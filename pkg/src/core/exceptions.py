from typing import Optional

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_DATA = 4
EXIT_NUMERICAL = 5
EXIT_IDENTIFIABILITY_WARNING = 6


class SeparationError(Exception):
    """Base class of every error raised by the package."""

    exit_code = 1


class ConfigError(SeparationError):
    exit_code = EXIT_CONFIG


class ParameterError(ConfigError, ValueError):
    pass


class StabilityError(ParameterError):
    pass


class DegenerateProcessError(ParameterError):
    pass


class DataError(SeparationError):
    exit_code = EXIT_DATA


class DimensionError(DataError, ValueError):
    pass


class SignalValidationError(DataError, ValueError):
    pass


class NumericalError(SeparationError, ArithmeticError):
    exit_code = EXIT_NUMERICAL


class NotPositiveDefiniteError(NumericalError):
    def __init__(self, message: str, bin_index: Optional[int] = None):
        super().__init__(message)
        self.bin_index = bin_index


class RankDeficiencyError(NumericalError):
    pass


class ExperimentError(NumericalError):
    pass
