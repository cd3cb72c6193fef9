"""Exception hierarchy shared by all solver layers."""


class PlapError(Exception):
    """Base class for every error raised by plapshape."""


class GeometryError(PlapError, ValueError):
    """Domain parameters violate 0 < r0 < r1, 0 <= s < r1 - r0."""


class MeshQualityError(PlapError):
    """A generated mesh has folded or sliver elements."""


class DegenerateJacobian(PlapError, ArithmeticError):
    """The unregularized Jacobian is unbounded (p < 2, eps = 0, zero gradient)."""


class LinearSolveFailure(PlapError):
    """Iterative linear solve hit its iteration cap."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class NonConvergence(PlapError):
    """Nonlinear iteration exhausted its budget.

    The best iterate found so far is kept on ``best`` together with its
    residual so the caller can decide whether it is usable.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class ZeroField(PlapError, ZeroDivisionError):
    """Rayleigh quotient requested for a field with vanishing L^p norm."""


class BracketFailure(PlapError):
    """Bisection bracket does not enclose a sign change."""


class TagNotFound(PlapError, KeyError):
    """Requested boundary tag is absent from the mesh."""


class PointLocationFailure(PlapError):
    """A query point lies outside the triangulation."""


class InsufficientRecords(PlapError, ValueError):
    """Too few sweep records to judge monotonicity."""


class ConfigError(PlapError, ValueError):
    """Invalid sweep or CLI configuration."""
