"""Fixed-step classical RK4 integration with diagnostic hooks.

States are plain ndarrays of arbitrary shape (leading batch axes are
fine as long as the rhs broadcasts).  No manifold projection is applied:
drift off the group is a measured quantity, not something to hide.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteState

DEFAULT_STEPS = 400


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled states on [0, 1] plus per-sample diagnostics."""

    times: np.ndarray
    states: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.states, dtype=float)
        if t.ndim != 1 or t.shape[0] != s.shape[0]:
            raise ValueError("times and states must have matching lengths")
        if t.shape[0] < 2 or t[0] != 0.0 or t[-1] != 1.0:
            raise ValueError("trajectory must cover [0, 1]")
        gaps = np.diff(t)
        if np.any(np.abs(gaps - gaps[0]) > 1e-12):
            raise ValueError("trajectory times must be uniformly spaced")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def steps(self) -> int:
        return self.times.shape[0] - 1


def _rk4_step(rhs, t, y, dt):
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + (0.5 * dt) * k1)
    k3 = rhs(t + 0.5 * dt, y + (0.5 * dt) * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(rhs, y0, steps: int, hooks: dict | None = None) -> Trajectory:
    """Integrate dy/dt = rhs(t, y) over [0, 1] with `steps` RK4 steps.

    ``hooks`` maps diagnostic names to callables ``(t, y) -> float``
    recorded at every accepted step (including t = 0).  Raises
    :class:`NonFiniteState` with the offending step index if the state
    leaves the finite range.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    y = np.array(y0, dtype=float)
    dt = 1.0 / steps
    times = np.linspace(0.0, 1.0, steps + 1)
    states = np.empty((steps + 1,) + y.shape)
    states[0] = y
    records: dict[str, list] = {name: [] for name in (hooks or {})}
    for name, fn in (hooks or {}).items():
        records[name].append(fn(0.0, y))
    for k in range(steps):
        y = _rk4_step(rhs, k * dt, y, dt)
        if not np.all(np.isfinite(y)):
            raise NonFiniteState(k + 1)
        states[k + 1] = y
        for name, fn in (hooks or {}).items():
            records[name].append(fn(times[k + 1], y))
    diagnostics = {name: np.asarray(vals) for name, vals in records.items()}
    return Trajectory(times=times, states=states, diagnostics=diagnostics)


def final_state(rhs, y0, steps: int) -> np.ndarray:
    """Endpoint-only integration; avoids storing the trajectory."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    y = np.array(y0, dtype=float)
    dt = 1.0 / steps
    for k in range(steps):
        y = _rk4_step(rhs, k * dt, y, dt)
    if not np.all(np.isfinite(y)):
        raise NonFiniteState(steps)
    return y


def ode_residual(trajectory: Trajectory, rhs) -> np.ndarray:
    """Per-interior-sample defect of a trajectory against a vector field.

    Central-differences the stored states in time and compares with
    ``rhs`` evaluated on the same samples; the rhs must accept batched
    states.  Returns the max-abs defect per interior sample, an O(dt^2)
    quantity when the trajectory solves the field.
    """
    states = trajectory.states
    dt = trajectory.dt
    fd = (states[2:] - states[:-2]) / (2.0 * dt)
    vals = rhs(trajectory.times[1:-1], states[1:-1])
    diff = np.abs(fd - vals)
    return diff.reshape(diff.shape[0], -1).max(axis=1)


def trapezoid(values, times) -> float:
    return float(np.trapezoid(np.asarray(values, dtype=float), np.asarray(times, dtype=float)))
