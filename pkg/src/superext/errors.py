"""Shared exception types."""


class DegreeMismatch(ValueError):
    pass


class NotHomogeneous(ValueError):
    pass


class NotAdditiveError(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


class TheoremViolation(AssertionError):
    """A certified structural fact failed; must never occur."""
