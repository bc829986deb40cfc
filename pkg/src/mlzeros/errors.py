"""Exception types shared across the package."""


class MLZerosError(Exception):
    """Base class for library errors."""


class DegenerateDataError(MLZerosError, ValueError):
    """The data vector violates a standing assumption (e.g. ``u_+ = 0``)."""


class BudgetError(MLZerosError):
    """A root-count bound exceeds the configured path budget."""

    def __init__(self, message: str, bound: int, budget: int, label: str | None = None):
        super().__init__(message)
        self.bound = bound
        self.budget = budget
        self.label = label


class StructuralError(MLZerosError):
    """A start system cannot be built for the requested structure."""


class PreconditionError(MLZerosError, ValueError):
    """An input point does not satisfy the stated precondition."""


class IntegrityError(MLZerosError):
    """An archive does not belong to the model it is used with."""
