"""Exception types shared across the package."""


class UnreduceError(Exception):
    """Base class for all package-specific failures."""


class AngleNearPi(UnreduceError):
    """Rotation logarithm requested too close to the chart boundary at angle pi."""


class SingularInertia(UnreduceError):
    """The rotational mass-matrix solve failed."""


class SingularMetric(UnreduceError):
    """The 6x6 mass-matrix induced by the metric is not positive definite."""


class NonFiniteState(UnreduceError):
    """A state component became non-finite during time integration."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"non-finite state at step {step}")


class NonFiniteResidual(UnreduceError):
    """A shooting residual evaluation returned a non-finite value."""


class NoConvergence(UnreduceError):
    """The shooting solver exhausted its iteration budget.

    Carries the per-iteration report so callers can inspect the
    residual history.
    """

    def __init__(self, message: str, report=None):
        self.report = report if report is not None else []
        super().__init__(message)


class FlowNotDiffeomorphic(UnreduceError):
    """The circle flow map lost monotonicity (orientation no longer preserved)."""


class DimensionMismatch(UnreduceError):
    """Inputs that must share a discretization size do not."""
