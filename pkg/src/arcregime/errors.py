"""Exception hierarchy.

Each class carries the process exit code the command line uses for it.
"""


class ArcRegimeError(Exception):
    exit_code = 1


class ConfigError(ArcRegimeError, ValueError):
    exit_code = 2


class DataError(ArcRegimeError, ValueError):
    exit_code = 3


class NumericalError(ArcRegimeError, ArithmeticError):
    exit_code = 4
