import numpy as np
import pytest

from unreduce import curves, lie, se3, so3
from unreduce.shoot import SolveOptions


def circle(n, r=1.0, center=(0.0, 0.0)):
    s = np.arange(n) / n
    return np.stack([center[0] + r * np.cos(2 * np.pi * s),
                     center[1] + r * np.sin(2 * np.pi * s)], axis=1)


def rotation_xz(ax=0.7, az=1.1):
    return lie.exp_so3(lie.hat([ax, 0.0, 0.0])) @ lie.exp_so3(lie.hat([0.0, 0.0, az]))


@pytest.fixture(scope="session")
def so3_canonical_solve():
    problem = so3.So3Problem(q0=np.eye(3), q1=rotation_xz(), inertia=np.eye(3))
    return problem, so3.solve(problem)


@pytest.fixture(scope="session")
def so3_anisotropic_solve():
    problem = so3.So3Problem(q0=np.eye(3), q1=rotation_xz(1.4, 1.7),
                             inertia=np.diag([1.0, 2.0, 3.0]))
    return problem, so3.solve(problem)


@pytest.fixture(scope="session")
def se3_generic_solve():
    metric = se3.Se3Metric(inertia=np.diag([1.0, 1.5, 2.0]),
                           coupling=np.array([0.2, -0.1, 0.15]), scalar=1.2)
    problem = se3.Se3Problem(
        q0=lie.SE3Element(rot=np.eye(3), trans=np.zeros(3)),
        q1=lie.SE3Element(rot=rotation_xz(0.5, 0.9), trans=np.array([0.8, -0.4, 0.3])),
        metric=metric)
    return problem, se3.solve(problem)


@pytest.fixture(scope="session")
def curve_shift_solve():
    n, k = 32, 4
    template = circle(n)
    target = np.roll(template, -k, axis=0)
    kernel = curves.GaussianKernel(sigma=0.5)
    result = curves.solve_matching(template, target, kernel,
                                   SolveOptions(tol=1e-8, max_iter=80, steps=200))
    return template, target, kernel, k, result


@pytest.fixture(scope="session")
def curve_radial_solve():
    n = 32
    template = circle(n)
    target = circle(n, r=1.4)
    kernel = curves.GaussianKernel(sigma=0.5)
    result = curves.solve_matching(template, target, kernel,
                                   SolveOptions(tol=1e-8, max_iter=80, steps=400))
    return template, target, kernel, result
