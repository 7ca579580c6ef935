"""Exception hierarchy shared by every stage of the allocation pipeline."""


class EvBudgetError(Exception):
    """Base class for all errors raised by this package."""


class BudgetNonPositive(EvBudgetError):
    pass


class DimensionMismatch(EvBudgetError):
    pass


class EmptyInput(EvBudgetError):
    pass


class InvalidGeometry(EvBudgetError):
    pass


class SampleTooLarge(EvBudgetError):
    pass


class BudgetTooSmall(EvBudgetError):
    pass


class MalformedScores(EvBudgetError):
    """Score list does not cover frames 0..T-1 exactly once."""


class DuplicateFrame(MalformedScores):
    pass


class MissingFrame(EvBudgetError):
    pass


class ScaleMismatch(EvBudgetError):
    pass


class InvalidSpec(EvBudgetError):
    pass


class ShapeMismatch(EvBudgetError):
    pass


class IoFailure(EvBudgetError):
    pass
