"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems -> 2,
data problems -> 3, numeric problems -> 4.
"""


class RetrospectError(Exception):
    """Base class for all package errors."""


class SchemaError(RetrospectError):
    """A column-role mapping or config file is inconsistent with the data."""


class DataError(RetrospectError):
    """A data file violates the loader contract (missing / non-numeric cells)."""


class ParameterError(RetrospectError):
    """An operation was called with out-of-range parameters."""


class NumericError(RetrospectError):
    """A numeric procedure cannot proceed (singular matrix, non-finite input)."""


class PositivityError(NumericError):
    """Estimated propensity scores fall outside the admissible clipped range."""


class SupportError(DataError):
    """A matching cell has no donor units to draw counterfactuals from."""


class UsageError(RetrospectError):
    """Operations combined in an unsupported way (e.g. pooling mixed methods)."""
