"""Shared exception types."""


class GroupMismatchError(ValueError):
    """Two operands live in different groups."""


class DenseCapError(RuntimeError):
    """A dense array of size |Z| would exceed the configured cap."""


class BudgetExceededError(RuntimeError):
    """An enumeration refused to run past its explicit work budget."""


class OverflowGuardError(OverflowError):
    """An exact integer accumulation would overflow its fixed-width carrier.

    Raised *before* any wraparound can happen; results are never silently wrong.
    """


class InfeasibleModelError(ValueError):
    """A generator model cannot realize the requested sizes in the given group."""
