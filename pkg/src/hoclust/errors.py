"""Exception hierarchy shared by every module."""


class HoclustError(Exception):
    pass


class ParameterError(HoclustError, ValueError):
    pass


class ModeIndexError(HoclustError, IndexError):
    pass


class SliceError(HoclustError, IndexError):
    pass


class ShapeError(HoclustError, ValueError):
    pass


class DegenerateInputError(HoclustError, ValueError):
    pass


class ContractError(HoclustError, ValueError):
    pass


class BudgetError(HoclustError, RuntimeError):
    """Raised when an exhaustive enumeration would exceed its budget."""

    def __init__(self, message, size=None, budget=None):
        super().__init__(message)
        self.size = size
        self.budget = budget


class ConvergenceError(HoclustError, RuntimeError):
    """Iterative routine stopped at ``max_iter``; ``last`` holds the final iterate."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last
