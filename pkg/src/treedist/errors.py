"""Exception types raised across the package.

The CLI maps the three top-level families onto exit codes:
``SpecError`` -> 2, ``DataError`` -> 3, ``BudgetError`` -> 4.
"""


class TreedistError(Exception):
    pass


class SpecError(TreedistError, ValueError):
    """Invalid configuration, arguments or experiment description."""


class DataError(TreedistError, ValueError):
    """Malformed or inconsistent input data."""


class BudgetError(TreedistError, RuntimeError):
    """A configured resource guard was exceeded."""


class InvalidLabelError(DataError):
    pass


class UniverseMismatchError(DataError):
    pass


class ArityError(DataError):
    """Two clusterings need the same number of parts but do not have it."""


class UndefinedInputError(DataError):
    pass


class NodeKindError(TreedistError, ValueError):
    """A node id refers to a branch where a leaf was required (or vice versa)."""


class TreeParseError(DataError):
    def __init__(self, message, location="$"):
        super().__init__(f"{location}: {message}")
        self.location = location


class NoConsistentTreeError(DataError):
    """Instances with identical features but different labels."""


class DiscardRateError(BudgetError):
    pass
