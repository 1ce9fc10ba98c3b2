"""Exception hierarchy shared by every module.

Each class carries an ``exit_code`` used by the command line front-end.
"""


class HokError(Exception):
    exit_code = 1


class InvalidInputError(HokError, ValueError):
    exit_code = 2


class InvalidParameterError(HokError, ValueError):
    exit_code = 3


class DimensionError(HokError, ValueError):
    exit_code = 4


class InvariantError(HokError, ValueError):
    exit_code = 5


class NumericError(HokError, ArithmeticError):
    exit_code = 6


class DegenerateFitError(HokError, RuntimeError):
    exit_code = 7


class UndefinedMetricError(HokError, ValueError):
    exit_code = 8


class StratificationError(HokError, ValueError):
    exit_code = 9


class ConfigError(HokError, ValueError):
    exit_code = 10
