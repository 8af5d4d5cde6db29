"""Exception hierarchy.

The CLI maps these onto exit codes: usage problems exit 1, data problems 2,
numerical failures 3.
"""


class ISCRCError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ISCRCError, ValueError):
    """Invalid configuration or parameter value."""


class DataError(ISCRCError, ValueError):
    """Malformed or inconsistent input data."""

    def __init__(self, message, path=None, row=None):
        self.path = path
        self.row = row
        where = []
        if path is not None:
            where.append(str(path))
        if row is not None:
            where.append(f"row {row}")
        if where:
            message = f"{': '.join(where)}: {message}"
        super().__init__(message)


class DimensionError(DataError):
    """Operand shapes do not agree.

    ``operand`` names the argument that failed the check.
    """

    def __init__(self, operand, expected, got):
        self.operand = operand
        self.expected = expected
        self.got = got
        super().__init__(f"dimension mismatch in {operand!r}: expected {expected}, got {got}")


class SolverError(ISCRCError, ArithmeticError):
    """A numerical routine could not produce a valid answer."""


class DegenerateGeometryError(SolverError):
    """The sum-to-one normalization of a closed-form solution is impossible."""


class InfeasibleError(SolverError):
    """A capped simplex {x : sum(x) = 1, 0 <= x <= tau} is empty."""
