"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Malformed input: wrong shape, non-finite entries, dimension mismatch."""


class DomainError(ValueError):
    """Value outside the mathematical domain of the operation (e.g. not SPD)."""


class NotApplicableError(ValueError):
    """The operation's precondition is structurally violated (e.g. nontrivial holonomy)."""


class ParseError(ValueError):
    """A file could not be parsed; message carries location information."""
