"""
Exception hierarchy for feecast.

``UserError`` subclasses describe bad input (files, config, arguments) and map
to CLI exit code 1; everything else deriving from ``FeecastError`` is treated as
an internal failure (exit code 2).
"""

from __future__ import annotations


class FeecastError(Exception):
    """Root of all feecast errors."""


class UserError(FeecastError):
    """Problem with caller-supplied input or configuration."""


# -------------------------------- dataset / io
class MissingColumn(UserError):
    def __init__(self, name: str):
        super().__init__(f"missing column '{name}'")
        self.name = name


class MalformedNumber(UserError):
    def __init__(self, row: int, col: str, value: str):
        super().__init__(f"row {row}, column '{col}': cannot parse {value!r} as a number")
        self.row = row
        self.col = col
        self.value = value


class EmptyFile(UserError):
    pass


class IoFailure(UserError):
    pass


class ConfigError(UserError):
    pass


class UsageError(UserError):
    """Bad command-line arguments."""


# -------------------------------- ingest
class RpcUnreachable(FeecastError):
    pass


class UnknownBlock(UserError):
    pass


class MalformedResponse(FeecastError):
    pass


class HttpFailure(FeecastError):
    pass


class FieldMissing(FeecastError):
    pass


class StaleInputs(FeecastError):
    pass


# -------------------------------- preprocessing / features
class AllMissingColumn(UserError):
    def __init__(self, name: str):
        super().__init__(f"column '{name}' has no finite values")
        self.name = name


class EmptyFitSlice(UserError):
    pass


class LagTooLarge(UserError):
    pass


class LengthMismatch(UserError):
    pass


# -------------------------------- numerics / models
class SeriesTooShort(UserError):
    pass


class ShapeMismatch(UserError):
    pass


class EmptyInput(UserError):
    pass


class NonFiniteObjective(FeecastError):
    pass


class SingularSystem(FeecastError):
    pass


class OptimizerFailure(FeecastError):
    pass


class HorizonNonPositive(UserError):
    pass


class Diverged(FeecastError):
    pass


class TooFewRows(UserError):
    pass


# -------------------------------- evaluation
class ConstantActuals(UserError):
    pass


class InsufficientRows(UserError):
    pass


class LeakageError(FeecastError):
    """Fitted statistics or forecasts overlap rows they must not see."""
