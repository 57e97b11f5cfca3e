"""Damped Gauss-Newton (Levenberg-Marquardt) shooting solver.

Jacobians are formed by central finite differences.  A residual may be
square or overdetermined (n >= m).  Callers with expensive residuals can
supply a batched evaluator so all Jacobian columns are integrated in one
vectorized pass, and/or ask for thread-parallel column evaluation; both
paths produce results identical to the sequential one for deterministic
residuals.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NoConvergence, NonFiniteResidual

_DAMPING_CEIL = 1e12


@dataclass(frozen=True)
class SolveOptions:
    """Knobs shared by the shooting-based solvers."""

    tol: float = 1e-8
    max_iter: int = 60
    steps: int = 400
    fd_step: float = 1e-6
    damping: float = 1e-3


@dataclass(frozen=True)
class ShootingResult:
    """Solved unknowns plus the trajectories and conservation report."""

    unknowns: np.ndarray
    residual_norm: float
    cost: float
    iterations: int
    trajectories: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    report: list = field(default_factory=list)
    labels: tuple = ()


def _check_finite(r):
    if not np.all(np.isfinite(r)):
        raise NonFiniteResidual("residual returned non-finite values")


def fd_jacobian(residual, x, step: float = 1e-6, x_scale=None, residual_batch=None,
                parallel: bool = False) -> np.ndarray:
    """Central-difference Jacobian of ``residual`` at ``x``.

    ``x_scale`` gives a characteristic magnitude per unknown; the step for
    unknown i is ``step * max(1, |x_i|) * x_scale_i``.
    """
    if step <= 0.0:
        raise ValueError("fd step must be positive")
    x = np.asarray(x, dtype=float)
    m = x.shape[0]
    scale = np.ones(m) if x_scale is None else np.asarray(x_scale, dtype=float)
    h = step * np.maximum(1.0, np.abs(x)) * scale
    points = np.repeat(x[None, :], 2 * m, axis=0)
    for i in range(m):
        points[2 * i, i] += h[i]
        points[2 * i + 1, i] -= h[i]
    if residual_batch is not None:
        values = np.asarray(residual_batch(points), dtype=float)
    elif parallel:
        with ThreadPoolExecutor() as pool:
            values = np.asarray(list(pool.map(residual, points)), dtype=float)
    else:
        values = np.asarray([residual(p) for p in points], dtype=float)
    _check_finite(values)
    cols = (values[0::2] - values[1::2]) / (2.0 * h[:, None])
    return cols.T


def solve_lm(residual, x0, *, tol: float = 1e-8, max_iter: int = 60,
             fd_step: float = 1e-6, damping: float = 1e-3,
             x_scale=None, residual_batch=None):
    """Find x with ||residual(x)||_2 <= tol by damped Gauss-Newton.

    Each iteration first attempts the undamped Gauss-Newton step; if that
    does not strictly decrease the residual the step is re-solved with
    Marquardt damping, scaled up tenfold per rejection (and shrunk
    tenfold after each accepted step).  Returns ``(x, report)`` where
    ``report`` is one dict per accepted iterate (residual norms strictly
    decrease along it).  Raises :class:`NoConvergence` with the report
    attached when the iteration budget runs out, and
    :class:`NonFiniteResidual` when an evaluation leaves the finite
    range.
    """
    x = np.array(x0, dtype=float)
    r = np.asarray(residual(x), dtype=float)
    _check_finite(r)
    if r.shape[0] < x.shape[0]:
        raise ValueError("residual must have at least as many components as unknowns")
    norm = float(np.linalg.norm(r))
    lam = damping
    report = [{"iteration": 0, "residual_norm": norm, "damping": lam, "accepted": True}]
    for iteration in range(1, max_iter + 1):
        if norm <= tol:
            return x, report
        jac = fd_jacobian(residual, x, step=fd_step, x_scale=x_scale,
                          residual_batch=residual_batch)
        a = jac.T @ jac
        g = jac.T @ r
        d = np.clip(np.diag(a), 1e-14, None)
        accepted = False
        # try the undamped Gauss-Newton step first so linear and
        # near-converged problems finish in one move, then fall back to
        # the damped schedule
        attempt = 0.0
        while True:
            try:
                delta = np.linalg.solve(a + attempt * np.diag(d), -g)
            except np.linalg.LinAlgError:
                delta = None
            if delta is not None:
                x_new = x + delta
                r_new = np.asarray(residual(x_new), dtype=float)
                _check_finite(r_new)
                norm_new = float(np.linalg.norm(r_new))
                if norm_new < norm:
                    x, r, norm = x_new, r_new, norm_new
                    lam = max(lam / 10.0, 1e-15)
                    accepted = True
                    break
            if attempt == 0.0:
                attempt = lam
            else:
                attempt *= 10.0
                lam = attempt
            if attempt > _DAMPING_CEIL:
                break
        if not accepted:
            raise NoConvergence(
                f"no acceptable step at residual norm {norm:.3e}", report)
        report.append({"iteration": iteration, "residual_norm": norm,
                       "damping": attempt, "accepted": True})
    if norm <= tol:
        return x, report
    raise NoConvergence(
        f"residual norm {norm:.3e} above tol {tol:.1e} after {max_iter} iterations",
        report)
