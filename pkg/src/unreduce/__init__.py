"""Geodesic boundary value problems with the endpoint fixed only up to a
right symmetry action.

Three worked systems share the same structure: rigid-body rotations with
the target free about the z-axis (:mod:`unreduce.so3`), rigid placements
with the docking orientation free about z (:mod:`unreduce.se3`), and
closed planar curve matching up to reparameterisation
(:mod:`unreduce.curves`).  Each is solved two ways: the original
formulation whose endpoint condition holds only up to the symmetry
orbit, and a reparameterised formulation with the endpoint pinned
exactly and a constant symmetry generator added to the dynamics.  A
solved reparameterised run is pulled back to the original variables by
the cotangent lift of the relabelling flow, and the package verifies the
equivalence numerically (defect against the original equations,
conservation of the right-action momentum, and its vanishing on
solutions).
"""

from . import cli, curves, errors, integrate, lie, se3, shoot, so3
from .errors import (
    AngleNearPi,
    DimensionMismatch,
    FlowNotDiffeomorphic,
    NoConvergence,
    NonFiniteResidual,
    NonFiniteState,
    SingularInertia,
    SingularMetric,
    UnreduceError,
)
from .integrate import Trajectory
from .shoot import ShootingResult, SolveOptions

__version__ = "0.1.0"

__all__ = [
    "AngleNearPi",
    "DimensionMismatch",
    "FlowNotDiffeomorphic",
    "NoConvergence",
    "NonFiniteResidual",
    "NonFiniteState",
    "ShootingResult",
    "SingularInertia",
    "SingularMetric",
    "SolveOptions",
    "Trajectory",
    "UnreduceError",
    "cli",
    "curves",
    "errors",
    "integrate",
    "lie",
    "se3",
    "shoot",
    "so3",
]
