import numpy as np
import pytest

from conftest import rotation_xz
from unreduce import lie, so3
from unreduce.errors import SingularInertia
from unreduce.integrate import integrate, ode_residual
from unreduce.shoot import SolveOptions

RNG = np.random.default_rng(5)


def random_rotation(max_angle=2.5):
    v = RNG.standard_normal(3)
    v *= RNG.uniform(0.1, max_angle) / np.linalg.norm(v)
    return lie.exp_so3(lie.hat(v))


def test_zero_momentum_is_stationary():
    dq, dp = so3.rhs_original(np.eye(3), np.zeros((3, 3)), np.eye(3))
    assert np.array_equal(dq, np.zeros((3, 3)))
    assert np.array_equal(dp, np.zeros((3, 3)))


def test_one_parameter_subgroup_closed_form():
    # with unit inertia and P = -hat(e_z) Q0 the angular velocity is hat(e_z)
    q0 = random_rotation()
    P0 = -lie.hat([0.0, 0.0, 1.0]) @ q0
    traj = integrate(so3._packed_rhs(np.eye(3)), so3.pack_state(q0, P0), 400)
    expected = lie.exp_so3(lie.hat([0.0, 0.0, 1.0])) @ q0
    assert np.max(np.abs(traj.states[-1, 0] - expected)) <= 1e-8


def test_energy_conserved_along_trajectories():
    inertia = np.diag([1.0, 2.0, 3.0])
    P0 = so3.initial_momentum(so3.So3Problem(np.eye(3), np.eye(3), inertia), [0.9, -0.7])
    traj = integrate(so3._packed_rhs(inertia), so3.pack_state(np.eye(3), P0), 400,
                     hooks=so3._hooks(inertia))
    en = traj.diagnostics["energy"]
    assert np.max(np.abs(en - en[0])) <= 1e-8


def test_reparam_reduces_to_original_at_zero_theta():
    inertia = np.diag([1.2, 0.8, 2.0])
    for _ in range(10):
        Q = random_rotation()
        P = RNG.standard_normal((3, 3))
        dq0, dp0 = so3.rhs_original(Q, P, inertia)
        dq1, dp1 = so3.rhs_reparam(Q, P, inertia, 0.0)
        assert np.array_equal(dq0, dq1)
        assert np.array_equal(dp0, dp1)


def test_pure_relabelling_flow():
    # zero momentum, theta = c: the endpoint winds about z in the body frame
    q0 = random_rotation()
    c = 0.8
    traj = integrate(so3._packed_rhs(np.eye(3), theta=c), so3.pack_state(q0, np.zeros((3, 3))), 400)
    expected = q0 @ lie.exp_so3(c * lie.Z_GEN)
    assert np.max(np.abs(traj.states[-1, 0] - expected)) <= 1e-10
    assert np.max(np.abs(traj.states[-1, 1])) == 0.0


def test_noether_along_reparam_trajectories():
    inertia = np.diag([1.0, 2.0, 3.0])
    for _ in range(5):
        q0 = random_rotation()
        prob = so3.So3Problem(q0, q0, inertia)
        P0 = so3.initial_momentum(prob, RNG.uniform(-1.5, 1.5, 2))
        theta = RNG.uniform(-1.0, 1.0)
        traj = integrate(so3._packed_rhs(inertia, theta), so3.pack_state(q0, P0), 400,
                         hooks=so3._hooks(inertia))
        jh = traj.diagnostics["j_h"]
        assert np.max(np.abs(jh - jh[0])) <= 1e-8


def test_reconstruct_identity_at_zero_theta():
    inertia = np.eye(3)
    P0 = so3.initial_momentum(so3.So3Problem(np.eye(3), np.eye(3), inertia), [0.5, 0.2])
    traj = integrate(so3._packed_rhs(inertia), so3.pack_state(np.eye(3), P0), 100)
    rec = so3.reconstruct(traj, 0.0)
    assert np.array_equal(rec.states, traj.states)


def test_reconstruct_preserves_momentum_combination():
    inertia = np.diag([1.0, 2.0, 3.0])
    q0 = random_rotation()
    P0 = so3.initial_momentum(so3.So3Problem(q0, q0, inertia), [1.1, -0.3])
    theta = 0.6
    traj = integrate(so3._packed_rhs(inertia, theta), so3.pack_state(q0, P0), 200)
    rec = so3.reconstruct(traj, theta)
    before = traj.states[:, 1] @ np.swapaxes(traj.states[:, 0], -1, -2)
    after = rec.states[:, 1] @ np.swapaxes(rec.states[:, 0], -1, -2)
    assert np.max(np.abs(before - after)) <= 1e-12


def test_equivalence_residual_second_order():
    inertia = np.diag([1.0, 2.0, 3.0])
    q0 = np.eye(3)
    P0 = so3.initial_momentum(so3.So3Problem(q0, q0, inertia), [0.8, -0.5])
    theta = 0.65

    def residual_at(steps):
        traj = integrate(so3._packed_rhs(inertia, theta), so3.pack_state(q0, P0), steps)
        rec = so3.reconstruct(traj, theta)
        return np.max(ode_residual(rec, so3._packed_rhs(inertia)))

    r400, r800 = residual_at(400), residual_at(800)
    assert r400 <= 1e-4
    assert 3.2 <= r400 / r800 <= 5.0


def test_solve_identity_target():
    problem = so3.So3Problem(np.eye(3), np.eye(3), np.diag([1.0, 2.0, 3.0]))
    result = so3.solve(problem)
    assert result.iterations == 0
    assert np.array_equal(result.unknowns, np.zeros(3))
    assert result.cost == 0.0


def test_solve_matches_orbit_grid_minimum(so3_canonical_solve):
    problem, result = so3_canonical_solve
    thetas = np.linspace(0.0, 2.0 * np.pi, 2000, endpoint=False)
    q1 = problem.q1.m
    grid = np.array([0.5 * np.sum(lie.log_so3(q1 @ lie.rotation_z(t)) ** 2)
                     for t in thetas])
    assert abs(result.cost - np.min(grid)) <= 1e-4


def test_solution_momentum_vanishes(so3_canonical_solve):
    _, result = so3_canonical_solve
    assert result.diagnostics["noether_max"] <= 1e-8


def test_solution_conservation_report(so3_anisotropic_solve):
    _, result = so3_anisotropic_solve
    assert result.residual_norm <= 1e-8
    assert result.diagnostics["noether_drift"] <= 1e-8
    assert result.diagnostics["energy_drift"] <= 1e-8
    assert result.diagnostics["orthogonality"] <= 1e-9
    assert result.diagnostics["equivalence_residual"] <= 1e-4
    assert result.diagnostics["ep_residual"] <= 1e-4


def test_orbit_shift_of_target_shifts_theta(so3_canonical_solve):
    problem, result = so3_canonical_solve
    phi = 0.4
    shifted = so3.So3Problem(problem.q0, problem.q1.m @ lie.rotation_z(phi),
                             problem.inertia)
    result2 = so3.solve(shifted)
    assert abs(result2.cost - result.cost) <= 1e-8
    dtheta = (result2.unknowns[2] - result.unknowns[2] + phi) % (2.0 * np.pi)
    dtheta = min(dtheta, 2.0 * np.pi - dtheta)
    assert dtheta <= 1e-6


def test_euler_poincare_residual_constant_spin():
    # closed-form spin about z: the momentum is exactly constant and
    # parallel to the velocity, so both residual terms vanish identically
    from unreduce.integrate import Trajectory

    q0 = random_rotation()
    P0 = -lie.hat([0.0, 0.0, 1.3]) @ q0
    times = np.linspace(0.0, 1.0, 101)
    rots = np.stack([lie.exp_so3(lie.hat([0.0, 0.0, 1.3 * t])) for t in times])
    states = np.stack([rots @ q0, rots @ P0], axis=1)
    traj = Trajectory(times=times, states=states)
    assert np.max(so3.euler_poincare_residual(traj, np.eye(3))) <= 1e-12


def test_euler_poincare_residual_fourth_order_decay(so3_anisotropic_solve):
    problem, result = so3_anisotropic_solve
    unknowns = so3.So3Unknowns.from_vector(result.unknowns)

    def residual_at(steps):
        _, rec = so3.integrate_solution(problem, unknowns, steps, with_hooks=False)
        return np.max(so3.euler_poincare_residual(rec, problem.inertia))

    r200, r400 = residual_at(200), residual_at(400)
    assert r400 <= 1e-4
    assert 10.0 <= r200 / r400 <= 24.0


def test_euler_poincare_negative_control():
    inertia = np.diag([1.0, 2.0, 3.0])
    P0 = so3.initial_momentum(so3.So3Problem(np.eye(3), np.eye(3), inertia), [1.0, -0.8])
    base = so3._packed_rhs(inertia)
    traj = integrate(lambda t, y: 1.1 * base(t, y), so3.pack_state(np.eye(3), P0), 400)
    assert np.max(so3.euler_poincare_residual(traj, inertia)) >= 1e-2


def test_problem_validates_inertia():
    with pytest.raises(ValueError):
        so3.So3Problem(np.eye(3), np.eye(3), np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(ValueError):
        so3.So3Problem(np.eye(3), np.eye(3), np.array([[1.0, 0.5, 0.0],
                                                       [0.0, 1.0, 0.0],
                                                       [0.0, 0.0, 1.0]]))


def test_singular_inertia_surfaces():
    with pytest.raises(SingularInertia):
        so3._packed_rhs(np.zeros((3, 3)))


def test_initial_momentum_zeroes_right_momentum_any_start():
    for _ in range(20):
        q0 = random_rotation()
        prob = so3.So3Problem(q0, q0, np.eye(3))
        P0 = so3.initial_momentum(prob, RNG.uniform(-2.0, 2.0, 2))
        assert abs(lie.momentum_right_z(q0, P0)) <= 1e-14
