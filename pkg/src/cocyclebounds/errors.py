"""Exception hierarchy shared by every module."""


class CocycleError(Exception):
    """Base class for library errors."""


class InputError(CocycleError, ValueError):
    """Malformed or out-of-range input."""


class DegenerateError(CocycleError):
    """Input is degenerate (zero matrix, singular matrix, ...)."""


class StructureError(CocycleError):
    """A graph or system lacks a required structural property."""


class AmalgamationError(CocycleError, ValueError):
    """Overlap mismatch in an amalgamated concatenation."""


class LanguageEmptyError(CocycleError):
    """A word count or language turned out to be empty."""


class VerificationError(CocycleError):
    """A certificate or construction failed its own check."""


class BudgetExceeded(CocycleError):
    """A net or search would exceed its size budget."""
