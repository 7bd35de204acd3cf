"""Exception types raised across the package."""


class MonigError(Exception):
    """Base class for all package errors."""


class DomainError(MonigError, ValueError):
    """A value lies outside the domain of an operation."""


class EmptyInputError(MonigError, ValueError):
    pass


class NegativeWeightError(MonigError, ValueError):
    pass


class ShapeMismatch(MonigError, ValueError):
    pass


class GraphConsumed(MonigError, RuntimeError):
    """Backward was called on a graph whose recording was already released."""


class ConfigError(MonigError, ValueError):
    pass


class ParseError(MonigError, ValueError):
    """A CSV cell could not be read as a number."""

    def __init__(self, row, column, reason):
        self.row = row
        self.column = column
        self.reason = reason
        super().__init__(f"row {row}, column {column}: {reason}")


class SchemaError(MonigError, ValueError):
    pass


class SplitError(MonigError, ValueError):
    pass


class LengthMismatch(MonigError, ValueError):
    pass


class SingleClass(MonigError, ValueError):
    """AUROC is undefined when only one label class is present."""
