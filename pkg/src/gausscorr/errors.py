"""Exception hierarchy shared by all modules."""


class GaussCorrError(Exception):
    """Base class for all library errors."""


class DimensionError(GaussCorrError):
    """Operands live in incompatible ambient dimensions."""


class DomainError(GaussCorrError):
    """A parameter is outside its admissible range."""


class SingularDensityError(DomainError):
    """The correlated-pair density was requested at the singular mixing value 1."""


class ConvergenceError(GaussCorrError):
    """An iterative scheme exhausted its iteration budget.

    Carries the final residual in ``residual``.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class BudgetError(GaussCorrError):
    """A deterministic grid would exceed the configured node budget."""


class DegenerateSetError(GaussCorrError):
    """An operation needs a set of positive measure but got a null one."""


class ResolutionError(GaussCorrError):
    """A grid or step size is too coarse for the requested accuracy."""


class EvennessError(GaussCorrError):
    """A function that must be even (symmetric under negation) is not."""


class UnderflowError_(GaussCorrError):
    """A positive quantity fell below the configured floor."""


class BoundaryGradientError(GaussCorrError):
    """Gradient requested on the non-smooth boundary with zero smoothing."""


class TailStarvationError(GaussCorrError):
    """Too few surviving paths in the fit window to estimate a decay rate.

    ``suggestion`` holds a human-readable hint (more paths / larger horizon).
    """

    def __init__(self, message, suggestion=None):
        super().__init__(message)
        self.suggestion = suggestion


class PreconditionError(GaussCorrError):
    """A descriptor failed a spot-check of its declared properties."""
