"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigurationError(ValueError):
    """Inconsistent or invalid configuration values."""


class BudgetExhausted(RuntimeError):
    """Raised by an oracle when its query budget is already spent."""

    def __init__(self, budget):
        super().__init__(f"query budget of {budget} exhausted")
        self.budget = budget


class AttackSucceeded(Exception):
    """Control-flow signal: the set function just produced a successful image.

    Carries the working set whose evaluation triggered success and its value.
    """

    def __init__(self, working, value):
        super().__init__("attack succeeded")
        self.working = working
        self.value = value
