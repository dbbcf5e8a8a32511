"""Exception hierarchy shared by every tabcheck module."""

from __future__ import annotations


class TabcheckError(Exception):
    """Base class for all errors raised by tabcheck."""


# --- data loading -----------------------------------------------------------


class SchemaError(TabcheckError, ValueError):
    """Malformed schema definition or schema file."""


class HeaderMismatchError(TabcheckError, ValueError):
    def __init__(self, expected, found):
        self.expected = list(expected)
        self.found = list(found)
        super().__init__(
            f"CSV header does not match schema: expected {sorted(self.expected)}, "
            f"found {sorted(self.found)}"
        )


class DuplicateHeaderError(TabcheckError, ValueError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"duplicate column in CSV header: {name!r}")


class ParseError(TabcheckError, ValueError):
    """A cell (or standalone string) could not be parsed into its declared kind."""

    def __init__(self, message, row=None, column=None, raw=None):
        self.row = row
        self.column = column
        self.raw = raw
        where = ""
        if row is not None:
            where = f" (row {row}, column {column!r}, text {raw!r})"
        super().__init__(message + where)


class RangeError(ParseError):
    """Well-formed datetime text naming an impossible date or time."""


# --- rule language ----------------------------------------------------------


class RuleError(TabcheckError, ValueError):
    """Error located in a rule file or expression; carries 1-based line/col."""

    def __init__(self, message, line=None, col=None):
        self.message = message
        self.line = line
        self.col = col
        loc = f"line {line}, col {col}: " if line is not None else ""
        super().__init__(loc + message)


class RuleSyntaxError(RuleError):
    pass


class UnknownColumnError(RuleError):
    def __init__(self, name, line=None, col=None):
        self.name = name
        super().__init__(f"unknown column {name!r}", line, col)


class RuleTypeError(RuleError):
    def __init__(self, expected, found, line=None, col=None, context=""):
        self.expected = expected
        self.found = found
        msg = f"type error: expected {expected}, found {found}"
        if context:
            msg += f" in {context}"
        super().__init__(msg, line, col)


# --- metrics ----------------------------------------------------------------


class SchemaMismatchError(TabcheckError, ValueError):
    pass


class EmptyTableError(TabcheckError, ValueError):
    pass


class NonCategoricalColumnError(TabcheckError, ValueError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"consistency group column {name!r} is not categorical")


class EmptyReferenceError(TabcheckError, ValueError):
    pass


class DegenerateDataError(TabcheckError, ValueError):
    pass


class SingularCovarianceError(TabcheckError, ArithmeticError):
    pass


class DimensionMismatchError(TabcheckError, ValueError):
    pass


# --- harness ----------------------------------------------------------------


class UnknownTargetError(TabcheckError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown target"


class InsufficientRowsError(TabcheckError, ValueError):
    pass
