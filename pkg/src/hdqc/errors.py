"""Exception hierarchy.

The CLI maps each family onto an exit code: ``ConfigError`` -> 1,
``DataError`` -> 2, ``NumericalError`` -> 3.
"""


class HDQCError(Exception):
    exit_code = 2


class ConfigError(HDQCError, ValueError):
    exit_code = 1


class DataError(HDQCError, ValueError):
    exit_code = 2


class InsufficientSamplesError(DataError):
    pass


class DimensionError(DataError):
    pass


class DegenerateDataError(DataError):
    pass


class DegenerateFeatureError(DataError):
    def __init__(self, coordinate, message=None):
        self.coordinate = int(coordinate)
        super().__init__(message or f"zero sample variance at coordinate {self.coordinate}")


class PreconditionError(DataError):
    pass


class NumericalError(HDQCError, ArithmeticError):
    exit_code = 3


class SingularPrecisionError(NumericalError):
    pass


class UndefinedRatioError(NumericalError):
    pass
