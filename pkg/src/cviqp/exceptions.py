"""Exception types shared across the package.

Plain input-validation failures raise :class:`ValueError`; the classes below
mark the two failure modes the command line maps to dedicated exit codes.
"""


class BudgetExceededError(RuntimeError):
    """A grid or outcome lattice is larger than the configured point budget."""

    def __init__(self, what: str, required: int, budget: int):
        self.what = what
        self.required = int(required)
        self.budget = int(budget)
        super().__init__(
            f"{what} needs {self.required} points but the budget is {self.budget}; "
            "raise the budget (CVIQP_BUDGET / --budget) or coarsen the grid"
        )


class NumericalCheckError(ArithmeticError):
    """An internal numerical consistency assertion failed."""
