"""Rigid placement ("docking") geodesics with terminal orientation free
about the z-axis.

State y packs the 4x4 homogeneous blocks into a (2, 3, 4) array,
``y[0] = [Q | r]`` and ``y[1] = [P | p]``.  With the metric energy

    E(w, v) = (I vee(w)) . vee(w) + 2 vee(w) . (b x v) + c |v|^2 / 2

the controls solve the 6x6 linear system assembled from
:func:`variational_derivatives` against the momentum map

    dE/dw = -skew(P Q^T) - hat(r x p) / 2,      dE/dv = -p,

and the evolution is

    dQ = w Q,  dr = w r + v,  dP = -w^T P,  dp = -w^T p.

The reparameterised system adds ``alpha Q Z_GEN`` / ``alpha P Z_GEN`` and
is pulled back through Q -> Q exp(-alpha Z_GEN t), P likewise, with r, p
unchanged.  Energy conservation, the conservation of tr(P^T Q Z_GEN) and
the defect of pulled-back runs against the original equations arbitrate
these conventions (see the test suite).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lie
from .errors import SingularMetric
from .integrate import Trajectory, final_state, integrate, ode_residual, trapezoid
from .shoot import ShootingResult, SolveOptions, solve_lm

UNKNOWN_LABELS = ("pi0_x", "pi0_y", "p0_x", "p0_y", "p0_z", "alpha")


def variational_derivatives(omega, v, metric):
    """Partial derivatives of the metric energy in (omega, v).

    Returns ``(dE/domega, dE/dv)`` with the first slot an antisymmetric
    matrix paired by the trace pairing.  The pair is the exact gradient
    of :func:`energy`, which the finite-difference identity in the tests
    checks directly.
    """
    omega = np.asarray(omega, dtype=float)
    v = np.asarray(v, dtype=float)
    inertia, b, c = metric.inertia, metric.coupling, metric.scalar
    wv = lie.vee(omega)
    d_omega = lie.hat(wv @ inertia.T) + (
        v[..., :, None] * b[..., None, :] - b[..., :, None] * v[..., None, :])
    d_v = c * v + 2.0 * np.cross(wv, np.broadcast_to(b, wv.shape))
    return d_omega, d_v


@dataclass(frozen=True)
class Se3Metric:
    """Block metric: rotational inertia, rotation/translation coupling, mass.

    Positive definiteness is enforced on the 6x6 vee-coordinate Gram
    matrix of the induced quadratic form, since that form is what the
    energy actually uses.
    """

    inertia: np.ndarray
    coupling: np.ndarray
    scalar: float

    def __post_init__(self):
        inertia = np.asarray(self.inertia, dtype=float)
        coupling = np.asarray(self.coupling, dtype=float)
        if inertia.shape != (3, 3) or np.linalg.norm(inertia - inertia.T) > 1e-12:
            raise ValueError("inertia must be a symmetric 3x3 matrix")
        if coupling.shape != (3,):
            raise ValueError("coupling must be a 3-vector")
        scalar = float(self.scalar)
        if not scalar > 0.0:
            raise ValueError("scalar mass must be positive")
        object.__setattr__(self, "inertia", lie._frozen(inertia))
        object.__setattr__(self, "coupling", lie._frozen(coupling))
        object.__setattr__(self, "scalar", scalar)
        # mass matrix columns from the derivative formulas on basis elements
        mass = np.empty((6, 6))
        for j in range(3):
            d_omega, d_v = variational_derivatives(lie.hat(np.eye(3)[j]), np.zeros(3), self)
            mass[:3, j] = lie.vee(d_omega)
            mass[3:, j] = d_v
        for j in range(3):
            d_omega, d_v = variational_derivatives(np.zeros((3, 3)), np.eye(3)[j], self)
            mass[:3, 3 + j] = lie.vee(d_omega)
            mass[3:, 3 + j] = d_v
        gram = mass.copy()
        gram[:3] *= 2.0  # trace pairing weights the rotational block twice
        if np.linalg.norm(gram - gram.T) > 1e-10 or np.any(np.linalg.eigvalsh(gram) <= 0.0):
            raise SingularMetric("induced quadratic form is not positive definite")
        try:
            mass_inv = np.linalg.inv(mass)
        except np.linalg.LinAlgError as exc:
            raise SingularMetric(str(exc)) from None
        object.__setattr__(self, "mass", lie._frozen(mass))
        object.__setattr__(self, "gram", lie._frozen(gram))
        object.__setattr__(self, "mass_inv", lie._frozen(mass_inv))


def energy(omega, v, metric: Se3Metric) -> np.ndarray:
    """Quadratic energy (1/2) x^T G x in vee coordinates x = (vee(omega), v)."""
    x = np.concatenate([lie.vee(np.asarray(omega, dtype=float)),
                        np.asarray(v, dtype=float)], axis=-1)
    return 0.5 * np.sum(x * (x @ metric.gram.T), axis=-1)


@dataclass(frozen=True)
class Se3Problem:
    q0: lie.SE3Element
    q1: lie.SE3Element
    metric: Se3Metric

    def __post_init__(self):
        if not isinstance(self.q0, lie.SE3Element) or not isinstance(self.q1, lie.SE3Element):
            raise ValueError("q0 and q1 must be SE3Element instances")
        if not isinstance(self.metric, Se3Metric):
            raise ValueError("metric must be an Se3Metric")


@dataclass(frozen=True)
class Se3Unknowns:
    """Constrained rotational momentum, translational momentum, generator rate."""

    pi0: np.ndarray
    p0: np.ndarray
    alpha: float

    def __post_init__(self):
        pi0 = np.asarray(self.pi0, dtype=float)
        p0 = np.asarray(self.p0, dtype=float)
        if pi0.shape != (2,) or p0.shape != (3,):
            raise ValueError("pi0 must be a 2-vector and p0 a 3-vector")
        object.__setattr__(self, "pi0", lie._frozen(pi0))
        object.__setattr__(self, "p0", lie._frozen(p0))
        object.__setattr__(self, "alpha", float(self.alpha))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.pi0, self.p0, [self.alpha]])

    @staticmethod
    def from_vector(x) -> "Se3Unknowns":
        x = np.asarray(x, dtype=float)
        return Se3Unknowns(pi0=x[:2], p0=x[2:5], alpha=float(x[5]))


def pack_state(Q, r, P, p) -> np.ndarray:
    top = np.concatenate([np.asarray(Q, dtype=float),
                          np.asarray(r, dtype=float)[..., :, None]], axis=-1)
    bot = np.concatenate([np.asarray(P, dtype=float),
                          np.asarray(p, dtype=float)[..., :, None]], axis=-1)
    return np.stack([top, bot], axis=-3)


def unpack_state(y):
    y = np.asarray(y, dtype=float)
    return y[..., 0, :, :3], y[..., 0, :, 3], y[..., 1, :, :3], y[..., 1, :, 3]


def controls(Q, r, P, p, metric: Se3Metric):
    """(vee(omega), v) solving the mass-matrix system from the momentum map."""
    m_rot = lie.vee(lie.momentum_left_so3(Q, P)) - 0.5 * np.cross(r, p)
    rhs6 = np.concatenate([m_rot, -np.asarray(p, dtype=float)], axis=-1)
    x = rhs6 @ metric.mass_inv.T
    return x[..., :3], x[..., 3:]


def rhs_original(q, p_q, metric: Se3Metric):
    """Derivatives ((dQ, dr), (dP, dp)) of the original system."""
    Q, r = (q.rot.m, q.trans) if isinstance(q, lie.SE3Element) else q
    P, p = (p_q.rot_mom.m, p_q.trans_mom) if isinstance(p_q, lie.Se3Cotangent) else p_q
    wv, v = controls(Q, r, P, p, metric)
    w = lie.hat(wv)
    return (w @ Q, np.cross(wv, r) + v), (-w.T @ P, np.cross(wv, p))


def rhs_reparam(q, p_q, metric: Se3Metric, alpha: float):
    (dQ, dr), (dP, dp) = rhs_original(q, p_q, metric)
    Q, _ = (q.rot.m, q.trans) if isinstance(q, lie.SE3Element) else q
    P, _ = (p_q.rot_mom.m, p_q.trans_mom) if isinstance(p_q, lie.Se3Cotangent) else p_q
    return (dQ + alpha * (Q @ lie.Z_GEN), dr), (dP + alpha * (P @ lie.Z_GEN), dp)


def _packed_rhs(metric: Se3Metric, alpha: float = 0.0):
    mass_inv_t = metric.mass_inv.T
    gen4 = np.zeros((4, 4))
    gen4[:3, :3] = lie.Z_GEN

    def rhs(t, y):
        Q, r, P, p = unpack_state(y)
        m_rot = lie.vee(lie.momentum_left_so3(Q, P)) - 0.5 * np.cross(r, p)
        x = np.concatenate([m_rot, -p], axis=-1) @ mass_inv_t
        wv, v = x[..., :3], x[..., 3:]
        # w antisymmetric: -w^T [P|p] == w [P|p], so one batched matmul
        # advances both rows; dr picks up +v on the translation column.
        dy = lie.hat(wv)[..., None, :, :] @ y
        pad = np.zeros_like(dy)
        pad[..., 0, :, 3] = v
        dy = dy + pad
        if alpha != 0.0:
            dy = dy + alpha * (y @ gen4)
        return dy

    return rhs


def momentum_right_z(y) -> np.ndarray:
    Q, _, P, _ = unpack_state(y)
    return lie.momentum_right_z(Q, P)


def _hooks(metric: Se3Metric):
    def _energy(t, y):
        Q, r, P, p = unpack_state(y)
        wv, v = controls(Q, r, P, p, metric)
        return float(energy(lie.hat(wv), v, metric))

    return {
        "j_h": lambda t, y: float(momentum_right_z(y)),
        "energy": _energy,
        "orthogonality": lambda t, y: float(
            np.linalg.norm(y[0, :, :3].T @ y[0, :, :3] - np.eye(3))),
    }


def initial_momentum(problem: Se3Problem, pi0) -> np.ndarray:
    """Rotational momentum with zero component along the symmetry axis."""
    pi0 = np.asarray(pi0, dtype=float)
    q0 = problem.q0.rot.m
    m_spatial = q0 @ np.array([pi0[0], pi0[1], 0.0])
    return -lie.hat(m_spatial) @ q0


def reconstruct(trajectory: Trajectory, alpha: float, metric: Se3Metric | None = None) -> Trajectory:
    """Pull a reparameterised run back through the relabelling flow.

    Rotation blocks are multiplied on the right by exp(-alpha Z_GEN t);
    the translation state and momentum are unchanged.
    """
    angles = alpha * trajectory.times
    c, s = np.cos(angles), np.sin(angles)
    rots = np.zeros((angles.shape[0], 3, 3))
    rots[:, 0, 0] = c
    rots[:, 0, 1] = -s
    rots[:, 1, 0] = s
    rots[:, 1, 1] = c
    rots[:, 2, 2] = 1.0
    states = trajectory.states.copy()
    states[..., :, :3] = states[..., :, :3] @ rots[:, None, :, :]
    diagnostics = {}
    if metric is not None:
        Q, r, P, p = unpack_state(states)
        wv, v = controls(Q, r, P, p, metric)
        diagnostics = {
            "j_h": lie.momentum_right_z(Q, P),
            "energy": energy(lie.hat(wv), v, metric),
            "orthogonality": np.linalg.norm(
                np.swapaxes(Q, -1, -2) @ Q - np.eye(3), axis=(-2, -1)),
        }
    return Trajectory(times=trajectory.times, states=states, diagnostics=diagnostics)


def integrate_solution(problem: Se3Problem, unknowns: Se3Unknowns, steps: int,
                       with_hooks: bool = True):
    y0 = pack_state(problem.q0.rot.m, problem.q0.trans,
                    initial_momentum(problem, unknowns.pi0), unknowns.p0)
    hooks = _hooks(problem.metric) if with_hooks else None
    reparam = integrate(_packed_rhs(problem.metric, unknowns.alpha), y0, steps, hooks=hooks)
    recon = reconstruct(reparam, unknowns.alpha, metric=problem.metric)
    return reparam, recon


def _endpoint_defect(y_end, problem: Se3Problem) -> np.ndarray:
    Q, r, _, _ = unpack_state(y_end)
    rot_defect = lie.vee(lie.log_so3(Q.T @ problem.q1.rot.m))
    return np.concatenate([rot_defect, r - problem.q1.trans])


def _result_from(problem, x, labels, report, steps, reparam, recon):
    equivalence = ode_residual(recon, _packed_rhs(problem.metric))
    jh_rep = reparam.diagnostics["j_h"]
    en = recon.diagnostics["energy"]
    diagnostics = {
        "noether_drift": float(np.max(np.abs(jh_rep - jh_rep[0]))),
        "noether_max": float(np.max(np.abs(recon.diagnostics["j_h"]))),
        "energy_drift": float(np.max(np.abs(en - en[0]))),
        "orthogonality": float(max(np.max(reparam.diagnostics["orthogonality"]),
                                   np.max(recon.diagnostics["orthogonality"]))),
        "equivalence_residual": float(np.max(equivalence)),
    }
    return ShootingResult(
        unknowns=x,
        residual_norm=report[-1]["residual_norm"],
        cost=trapezoid(en, recon.times),
        iterations=report[-1]["iteration"],
        trajectories={"reparam": reparam, "reconstructed": recon},
        diagnostics=diagnostics,
        report=report,
        labels=labels,
    )


def solve(problem: Se3Problem, opts: SolveOptions | None = None) -> ShootingResult:
    """Shoot for (pi0, p0, alpha) hitting the target placement exactly."""
    opts = opts or SolveOptions()

    def residual(x):
        y0 = pack_state(problem.q0.rot.m, problem.q0.trans,
                        initial_momentum(problem, x[:2]), x[2:5])
        y_end = final_state(_packed_rhs(problem.metric, float(x[5])), y0, opts.steps)
        return _endpoint_defect(y_end, problem)

    guess_rot = lie.vee(lie.log_so3(problem.q0.rot.m.T @ problem.q1.rot.m))
    guess_p = -problem.metric.scalar * (problem.q1.trans - problem.q0.trans)
    x0 = np.concatenate([guess_rot[:2], guess_p, [0.0]])
    x, report = solve_lm(residual, x0, tol=opts.tol, max_iter=opts.max_iter,
                         fd_step=opts.fd_step, damping=opts.damping)
    unknowns = Se3Unknowns.from_vector(x)
    reparam, recon = integrate_solution(problem, unknowns, opts.steps)
    return _result_from(problem, x, UNKNOWN_LABELS, report, opts.steps, reparam, recon)


def solve_fixed_endpoint(problem: Se3Problem, opts: SolveOptions | None = None) -> ShootingResult:
    """Plain two-point solve with the symmetry disabled (alpha = 0).

    The rotational momentum is unconstrained (three components), so this
    hits the target orientation exactly rather than up to a z-rotation.
    Used as the brute-force oracle against :func:`solve`.
    """
    opts = opts or SolveOptions()
    q0 = problem.q0.rot.m

    def momentum(mi):
        return -lie.hat(q0 @ np.asarray(mi, dtype=float)) @ q0

    def residual(x):
        y0 = pack_state(q0, problem.q0.trans, momentum(x[:3]), x[3:6])
        y_end = final_state(_packed_rhs(problem.metric, 0.0), y0, opts.steps)
        return _endpoint_defect(y_end, problem)

    guess_rot = lie.vee(lie.log_so3(q0.T @ problem.q1.rot.m))
    guess_p = -problem.metric.scalar * (problem.q1.trans - problem.q0.trans)
    x0 = np.concatenate([guess_rot, guess_p])
    x, report = solve_lm(residual, x0, tol=opts.tol, max_iter=opts.max_iter,
                         fd_step=opts.fd_step, damping=opts.damping)
    y0 = pack_state(q0, problem.q0.trans, momentum(x[:3]), x[3:6])
    reparam = integrate(_packed_rhs(problem.metric, 0.0), y0, opts.steps,
                        hooks=_hooks(problem.metric))
    recon = reconstruct(reparam, 0.0, metric=problem.metric)
    labels = ("m0_x", "m0_y", "m0_z", "p0_x", "p0_y", "p0_z")
    return _result_from(problem, x, labels, report, opts.steps, reparam, recon)
