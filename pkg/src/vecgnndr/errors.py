"""Exception hierarchy shared by all modules."""


class VecGnndrError(Exception):
    """Base class for library errors."""


class DomainError(VecGnndrError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericalError(VecGnndrError, ArithmeticError):
    """A numerical routine failed (non-convergence, non-finite terms, ...)."""


class ConvergenceError(NumericalError):
    """An iterative solver exhausted its budget."""


class AssumptionViolation(NumericalError):
    """A caller-asserted modelling assumption does not hold for some sample."""


class BudgetExceeded(VecGnndrError, ValueError):
    """A requested workload exceeds a hard resource cap."""


class AcceptanceRateError(NumericalError):
    """An MCMC chain accepted too few or too many proposals."""


class ToleranceBreach(VecGnndrError):
    """A validation run exceeded its stated tolerances."""
