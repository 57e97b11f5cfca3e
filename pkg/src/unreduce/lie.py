"""Matrix-group and Lie-algebra primitives shared by all solvers.

Conventions used throughout the package:

* the pairing between a covector ``p`` and a vector ``v`` represented as
  matrices is the Frobenius trace pairing ``<p, v> = tr(p^T v)``;
* ``ad_xi(gamma) = [xi, gamma] = xi gamma - gamma xi`` and ``ad*`` is its
  dual under the trace pairing;
* an inertia-like operator acts in vee coordinates,
  ``A(omega) = hat(I @ vee(omega))``, so that the image of an
  antisymmetric matrix stays antisymmetric for any symmetric ``I``.

All functions are pure; value types validate their invariants at
construction and freeze their arrays, so instances are safe to share
between threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AngleNearPi, FlowNotDiffeomorphic

ORTHOGONALITY_TOL = 1e-10
ANTISYMMETRY_TOL = 1e-12
_LOG_TRACE_CUTOFF = -1.0 + 1e-9

# Generator of the z-axis rotation family used by the right symmetry
# action on SO(3) and SE(3).  Note Z_GEN == -hat(e_z).
Z_GEN = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
Z_GEN.setflags(write=False)


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


def hat(v) -> np.ndarray:
    """Map a 3-vector to the antisymmetric matrix with hat(v) @ u == v x u.

    Supports leading batch dimensions: ``v`` of shape (..., 3) gives
    (..., 3, 3).
    """
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    out[..., 0, 1] = -z
    out[..., 0, 2] = y
    out[..., 1, 0] = z
    out[..., 1, 2] = -x
    out[..., 2, 0] = -y
    out[..., 2, 1] = x
    return out


def vee(m) -> np.ndarray:
    """Inverse of :func:`hat` on (..., 3, 3) antisymmetric matrices."""
    m = np.asarray(m, dtype=float)
    return np.stack([m[..., 2, 1], m[..., 0, 2], m[..., 1, 0]], axis=-1)


def skew_part(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return 0.5 * (m - np.swapaxes(m, -1, -2))


def trace_pair(p, v) -> np.ndarray:
    """Frobenius trace pairing tr(p^T v), batched over leading axes."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.sum(p * v, axis=(-2, -1))


def bracket(a, b) -> np.ndarray:
    """Matrix commutator [a, b] = a b - b a."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a @ b - b @ a


def ad_star(xi, mu) -> np.ndarray:
    """Dual of ad under the trace pairing: <ad*_xi mu, g> = <mu, [xi, g]>.

    For matrix algebras this evaluates to ``xi^T mu - mu xi^T``.
    """
    xi = np.asarray(xi, dtype=float)
    mu = np.asarray(mu, dtype=float)
    xit = np.swapaxes(xi, -1, -2)
    return xit @ mu - mu @ xit


def exp_so3(omega) -> np.ndarray:
    """Group exponential of an antisymmetric (..., 3, 3) matrix (Rodrigues)."""
    omega = np.asarray(omega, dtype=float)
    v = vee(omega)
    theta = np.linalg.norm(v, axis=-1)
    # series branches keep the theta -> 0 limit smooth to machine precision
    small = theta < 1e-8
    with np.errstate(invalid="ignore", divide="ignore"):
        a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(theta) / np.where(small, 1.0, theta))
        b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(theta)) / np.where(small, 1.0, theta**2))
    eye = np.broadcast_to(np.eye(3), omega.shape)
    return eye + a[..., None, None] * omega + b[..., None, None] * (omega @ omega)


def log_so3(r) -> np.ndarray:
    """Matrix logarithm on SO(3), restricted to rotation angles below pi.

    Raises :class:`AngleNearPi` when ``trace(r) <= -1 + 1e-9`` instead of
    picking an axis arbitrarily at the chart boundary.
    """
    r = np.asarray(r, dtype=float)
    tr = np.trace(r)
    if tr <= _LOG_TRACE_CUTOFF:
        raise AngleNearPi(f"rotation angle too close to pi (trace={tr:.12g})")
    v = vee(skew_part(r))  # = axis * sin(theta)
    s = np.linalg.norm(v)
    c = 0.5 * (tr - 1.0)
    theta = np.arctan2(s, c)
    if theta < 1e-7:
        return hat(v)
    return hat(v * (theta / s))


def rotation_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def momentum_left_so3(Q, P) -> np.ndarray:
    """Left-action momentum of (Q, P): the antisymmetric part -skew(P Q^T).

    Defined by <J(P), dw> = -tr((P Q^T)^T dw) over antisymmetric dw; the
    rotational mass-matrix solve reads the angular velocity off this value.
    """
    Q = np.asarray(Q, dtype=float)
    P = np.asarray(P, dtype=float)
    return -skew_part(P @ np.swapaxes(Q, -1, -2))


def momentum_right_z(Q, P) -> np.ndarray:
    """Momentum of the right z-rotation action: tr(P^T Q Z_GEN)."""
    Q = np.asarray(Q, dtype=float)
    return trace_pair(P, Q @ Z_GEN)


def periodic_interp_linear(values, x) -> np.ndarray:
    """Linear interpolation of samples on the uniform periodic grid i/N."""
    values = np.asarray(values, dtype=float)
    x = np.asarray(x, dtype=float)
    n = values.shape[0]
    xi = (x % 1.0) * n
    i0 = np.floor(xi).astype(int) % n
    frac = xi - np.floor(xi)
    return values[i0] * (1.0 - frac) + values[(i0 + 1) % n] * frac


def flow_s1_step(nu, x, dt: float) -> np.ndarray:
    """One RK4 step of dx/dt = nu(x) on the circle, nu linearly interpolated."""
    k1 = periodic_interp_linear(nu, x)
    k2 = periodic_interp_linear(nu, x + 0.5 * dt * k1)
    k3 = periodic_interp_linear(nu, x + 0.5 * dt * k2)
    k4 = periodic_interp_linear(nu, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def check_circle_monotone(eta) -> None:
    """Raise FlowNotDiffeomorphic unless eta is cyclically increasing."""
    eta = np.asarray(eta, dtype=float)
    gaps = np.diff(np.append(eta, eta[0] + 1.0))
    if np.any(gaps <= 0.0):
        raise FlowNotDiffeomorphic("circle map lost monotonicity")


def exp_flow_s1(nu, t: float, steps: int = 400) -> np.ndarray:
    """Time-t flow map of the vector field nu d/ds on the circle.

    ``nu`` is sampled on the uniform grid s_i = i/N and evaluated by
    periodic linear interpolation.  Returns the (unwrapped) images of the
    grid points; the result is checked to be orientation preserving.
    """
    nu = np.asarray(nu, dtype=float)
    n = nu.shape[0]
    x = np.arange(n) / n
    if t != 0.0:
        dt = t / steps
        for _ in range(steps):
            x = flow_s1_step(nu, x, dt)
    check_circle_monotone(x)
    return x


@dataclass(frozen=True)
class RotationMatrix:
    """A 3x3 matrix validated to be orthogonal with determinant one."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("RotationMatrix expects a 3x3 matrix")
        if np.linalg.norm(m.T @ m - np.eye(3)) > ORTHOGONALITY_TOL:
            raise ValueError("matrix is not orthogonal within tolerance")
        if abs(np.linalg.det(m) - 1.0) > ORTHOGONALITY_TOL:
            raise ValueError("matrix determinant is not 1 within tolerance")
        object.__setattr__(self, "m", _frozen(m))


@dataclass(frozen=True)
class Antisym3:
    """A 3x3 antisymmetric matrix (element of the rotation algebra)."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("Antisym3 expects a 3x3 matrix")
        if np.linalg.norm(m + m.T) > ANTISYMMETRY_TOL:
            raise ValueError("matrix is not antisymmetric within tolerance")
        object.__setattr__(self, "m", _frozen(m))


@dataclass(frozen=True)
class So3Cotangent:
    """A covector at a rotation: a general finite 3x3 matrix."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("So3Cotangent expects a 3x3 matrix")
        if not np.all(np.isfinite(m)):
            raise ValueError("So3Cotangent entries must be finite")
        object.__setattr__(self, "m", _frozen(m))


def _as_rotation(value) -> RotationMatrix:
    if isinstance(value, RotationMatrix):
        return value
    return RotationMatrix(np.asarray(value, dtype=float))


@dataclass(frozen=True)
class SE3Element:
    """Rigid placement: rotation block plus translation vector."""

    rot: RotationMatrix
    trans: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rot", _as_rotation(self.rot))
        t = np.asarray(self.trans, dtype=float)
        if t.shape != (3,):
            raise ValueError("SE3Element translation must be a 3-vector")
        if not np.all(np.isfinite(t)):
            raise ValueError("SE3Element translation must be finite")
        object.__setattr__(self, "trans", _frozen(t))


@dataclass(frozen=True)
class Se3Cotangent:
    """Momentum paired with an SE3Element: (rotational, translational)."""

    rot_mom: So3Cotangent
    trans_mom: np.ndarray

    def __post_init__(self):
        if not isinstance(self.rot_mom, So3Cotangent):
            object.__setattr__(self, "rot_mom", So3Cotangent(np.asarray(self.rot_mom, dtype=float)))
        p = np.asarray(self.trans_mom, dtype=float)
        if p.shape != (3,) or not np.all(np.isfinite(p)):
            raise ValueError("Se3Cotangent translational momentum must be a finite 3-vector")
        object.__setattr__(self, "trans_mom", _frozen(p))


@dataclass(frozen=True)
class Se3Velocity:
    """Body of controls: angular part (antisymmetric) and linear part."""

    ang: Antisym3
    lin: np.ndarray

    def __post_init__(self):
        if not isinstance(self.ang, Antisym3):
            object.__setattr__(self, "ang", Antisym3(np.asarray(self.ang, dtype=float)))
        v = np.asarray(self.lin, dtype=float)
        if v.shape != (3,) or not np.all(np.isfinite(v)):
            raise ValueError("Se3Velocity linear part must be a finite 3-vector")
        object.__setattr__(self, "lin", _frozen(v))
