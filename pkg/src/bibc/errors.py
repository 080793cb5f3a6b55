"""Exception taxonomy shared across the package."""


class BibcError(Exception):
    """Base class for everything raised deliberately by this package."""


class ParameterError(BibcError):
    """An argument violates its documented precondition (shape, sign, range)."""


class MatrixError(BibcError):
    """A matrix fails a structural requirement (Hermitian, positive definite)."""


class DomainError(BibcError):
    """A scalar argument falls outside the mathematical domain of a function."""


class ActionError(BibcError):
    """An agent action is malformed (wrong length, non-finite entries)."""


class StateError(BibcError):
    """An operation was called in the wrong order (step after episode end,
    backward before forward)."""


class ConfigError(BibcError):
    """A configuration file or override is malformed or names an unknown key."""


class InfeasibleProblem(BibcError):
    """The energy constraints cannot be met for at least one tag.

    `tag` carries the index of the offending tag when one can be identified.
    """

    def __init__(self, message, tag=None):
        super().__init__(message)
        self.tag = tag
