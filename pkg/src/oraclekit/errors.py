"""Exception types shared across the package."""


class OracleKitError(Exception):
    """Base class for all package errors."""


class SchemaError(OracleKitError):
    """Invalid input schema (bad bounds, duplicate names, undersampled signal)."""


class ConditionSyntaxError(OracleKitError):
    """Condition text could not be parsed."""

    def __init__(self, message, position, expected=None):
        self.position = position
        self.expected = expected
        detail = f"{message} at position {position}"
        if expected:
            detail += f" (expected {expected})"
        super().__init__(detail)


class UnknownVariableError(OracleKitError):
    """Condition references a name not present in the schema."""


class PositionMixError(OracleKitError):
    """An arithmetic expression mixes control points of different positions."""


class DepthExceededError(OracleKitError):
    """Condition tree is deeper than the configured maximum."""


class GrammarViolationError(OracleKitError):
    """Condition tree does not conform to the condition grammar."""


class LengthMismatchError(OracleKitError):
    """Signal trace length does not match the schema's control-point count."""


class NonSignalVariableError(OracleKitError):
    """Logic translation applied to a condition over non-signal variables."""


class GridMisalignedError(OracleKitError):
    """Quantifier interval endpoint is not on the control-point grid."""


class EmptyTargetClassError(OracleKitError):
    """Training set has no rows with the requested target verdict."""


class TestSetMismatchError(OracleKitError):
    """Two evaluation reports do not refer to the same test set."""
