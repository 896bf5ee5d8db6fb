"""Exception types shared across the package."""


class BellmanError(Exception):
    """Base class for all library errors."""


class OutOfDomainError(BellmanError):
    """A point fails the defining inequalities of its problem domain."""


class MissingParameterError(BellmanError):
    """An operation on the maximal-operator domain got no L parameter."""


class BellmanInfiniteError(BellmanError):
    """The requested value is infinite (upper exponential bound with delta >= 1)."""


class DegenerateHessianError(BellmanError):
    """Kernel extraction failed: Hessian is (numerically) zero or has full rank."""


class QuadratureError(BellmanError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class NonConvergenceError(BellmanError):
    """An iterative solve hit its iteration cap before meeting its tolerance."""


class SplittingError(BellmanError):
    """The splitting algorithm could not produce an admissible split."""


class ShapeMismatchError(BellmanError):
    """Two dyadic functions do not share an interval and depth."""
