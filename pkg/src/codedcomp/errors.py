"""Exception types shared across the library.

The CLI maps these onto exit codes: configuration problems exit with 2,
exceeded budgets with 3, and infeasible code designs with 4.
"""

from __future__ import annotations


class CodedCompError(Exception):
    """Base class for all library errors."""


class ParameterRangeError(CodedCompError, ValueError):
    """A parameter is outside its admissible range (e.g. q > K)."""


class DivisibilityError(CodedCompError, ValueError):
    """An integrality constraint between parameters is violated.

    The message names the violated constraint.
    """


class FieldTooSmall(CodedCompError, ValueError):
    """The finite field cannot host the requested code length."""


class SingularMatrix(CodedCompError, ArithmeticError):
    """A linear system over GF(2^l) has no unique solution."""


class PartitionLimitExceeded(CodedCompError, ValueError):
    """A construction only valid up to the lossless partition limit was
    requested beyond it."""


class BudgetExceeded(CodedCompError, RuntimeError):
    """An exhaustive computation would exceed its configured budget.

    Callers can usually fall back to a sampled evaluation mode.
    """


class InfeasibleDesign(CodedCompError, RuntimeError):
    """No code design meets the requested operating point."""


class ConfigError(CodedCompError, ValueError):
    """An experiment configuration failed validation.

    The message names the offending field.
    """
