"""Exception types shared across the package."""


class SchwingerError(Exception):
    """Base class for all package errors."""


class CapacityError(SchwingerError):
    """Requested operator exceeds the configured dimension limit."""


class DomainError(SchwingerError, ValueError):
    """An argument lies outside the domain of the operation."""


class NumericalError(SchwingerError, ArithmeticError):
    """An iterative routine failed to converge."""


class InfeasiblePlanError(SchwingerError):
    """A simulation plan violates one of its defining inequalities.

    ``violations`` lists a human-readable description of each failed check.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
