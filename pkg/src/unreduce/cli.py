"""Command-line front end: scenario files in, trajectories and reports out.

Scenario files are flat INI text (key = value pairs under section
headers).  Common keys live under ``[scenario]``::

    [scenario]
    kind = so3 | se3 | curve
    steps = 400          ; integrator steps on [0, 1], >= 10
    tol = 1e-8           ; endpoint tolerance for the shooting solver
    max_iter = 60

Problem data lives under a section named after the kind.  Matrices are
written row-major as whitespace-separated floats::

    [so3]
    q0 = 1 0 0  0 1 0  0 0 1
    q1 = ...
    inertia = 1 0 0  0 1 0  0 0 1

    [se3]
    q0_rot = ... (9)     q0_trans = x y z
    q1_rot = ... (9)     q1_trans = x y z
    inertia = ... (9)    coupling = x y z    scalar = c

    [curve]
    template = template.csv   ; two columns x,y, no header, closed
    target = target.csv
    sigma = 0.5
    nu_modes = 0              ; 0 = nodewise relabelling field

Outputs written to the output directory:

* ``summary.txt``      - key = value result record, floats at 17 digits
* ``trajectory.csv``   - the reconstructed (original-variable) run;
  columns are ``t``, the flattened state, then per-sample diagnostics
  (so3: q row-major 9, p 9, j_h, energy, orthogonality; se3: Q 9, r 3,
  P 9, p 3, then the same three; curve: x0,y0,...,px0,py0,...,
  hamiltonian, js_max)
* ``trajectory_reparam.csv`` - the reparameterised run, same layout
* ``verify.txt``       - each conservation check with value / tolerance

Exit codes: 0 solver success, 2 no convergence (or failed verify), 1
input error.  Error lines on stderr start with a machine-parsable code
(``E_PARAM``, ``E_IO``, ``E_INCONSISTENT``, ``E_NOCONV``).

``UNREDUCE_SEED`` fixes the randomized targets emitted by ``demo``.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from multiprocessing import Pool

import numpy as np

from . import curves, lie, se3, so3
from .errors import NoConvergence, UnreduceError
from .integrate import Trajectory, ode_residual
from .shoot import SolveOptions

# Single source of truth for the verification tolerances (quoted at the
# default 400-step resolution, dt = 2.5e-3).
TOLERANCES = {
    "noether_right": 1e-8,
    "noether_left_norm": 1e-8,
    "noether_trans_norm": 1e-8,
    "noether_casimir": 1e-8,
    "noether_js": 1e-5,
    "noether_linear_momentum": 1e-8,
    "energy_drift": 1e-8,
    "orthogonality": 1e-9,
    "ep_residual": 1e-4,
    "equivalence_residual": 1e-4,
}

KINDS = ("so3", "se3", "curve")


class CliError(Exception):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


def _fmt(value: float) -> str:
    return f"{float(value):.17g}"


def _parse_floats(text: str, count: int, label: str) -> np.ndarray:
    try:
        vals = np.array([float(tok) for tok in text.split()])
    except ValueError:
        raise CliError("E_PARAM", f"{label}: not a list of numbers") from None
    if vals.shape[0] != count:
        raise CliError("E_PARAM", f"{label}: expected {count} numbers, got {vals.shape[0]}")
    return vals


def _parse_matrix(text: str, label: str) -> np.ndarray:
    return _parse_floats(text, 9, label).reshape(3, 3)


class Scenario:
    """Validated scenario: kind, solver options, and the problem payload."""

    def __init__(self, kind, steps, tol, max_iter, payload, base_dir):
        self.kind = kind
        self.steps = steps
        self.tol = tol
        self.max_iter = max_iter
        self.payload = payload
        self.base_dir = base_dir

    @property
    def opts(self) -> SolveOptions:
        return SolveOptions(tol=self.tol, max_iter=self.max_iter, steps=self.steps)


def load_scenario(path: str, steps: int | None = None, tol: float | None = None) -> Scenario:
    if not os.path.exists(path):
        raise CliError("E_IO", f"scenario file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise CliError("E_PARAM", f"cannot parse scenario: {exc}") from None
    if "scenario" not in cp:
        raise CliError("E_PARAM", "missing [scenario] section")
    sec = cp["scenario"]
    kind = sec.get("kind", "").strip()
    if kind not in KINDS:
        raise CliError("E_PARAM", f"kind must be one of {KINDS}, got {kind!r}")
    try:
        steps = int(steps if steps is not None else sec.get("steps", "400"))
        tol = float(tol if tol is not None else sec.get("tol", "1e-8" if kind != "curve" else "1e-6"))
        max_iter = int(sec.get("max_iter", "60"))
    except ValueError:
        raise CliError("E_PARAM", "steps, tol and max_iter must be numeric") from None
    if steps < 10:
        raise CliError("E_PARAM", f"steps must be >= 10, got {steps}")
    if not tol > 0.0:
        raise CliError("E_PARAM", "tol must be positive")
    base_dir = os.path.dirname(os.path.abspath(path))

    try:
        if kind == "so3":
            if "so3" not in cp:
                raise CliError("E_PARAM", "missing [so3] section")
            d = cp["so3"]
            payload = so3.So3Problem(
                q0=_parse_matrix(d.get("q0", ""), "so3.q0"),
                q1=_parse_matrix(d.get("q1", ""), "so3.q1"),
                inertia=_parse_matrix(d.get("inertia", ""), "so3.inertia"))
        elif kind == "se3":
            if "se3" not in cp:
                raise CliError("E_PARAM", "missing [se3] section")
            d = cp["se3"]
            metric = se3.Se3Metric(
                inertia=_parse_matrix(d.get("inertia", ""), "se3.inertia"),
                coupling=_parse_floats(d.get("coupling", ""), 3, "se3.coupling"),
                scalar=float(d.get("scalar", "1.0")))
            payload = se3.Se3Problem(
                q0=lie.SE3Element(rot=_parse_matrix(d.get("q0_rot", ""), "se3.q0_rot"),
                                  trans=_parse_floats(d.get("q0_trans", ""), 3, "se3.q0_trans")),
                q1=lie.SE3Element(rot=_parse_matrix(d.get("q1_rot", ""), "se3.q1_rot"),
                                  trans=_parse_floats(d.get("q1_trans", ""), 3, "se3.q1_trans")),
                metric=metric)
        else:
            if "curve" not in cp:
                raise CliError("E_PARAM", "missing [curve] section")
            d = cp["curve"]
            sigma = float(d.get("sigma", "0.5"))
            kernel = curves.GaussianKernel(sigma=sigma)
            nu_modes = int(d.get("nu_modes", "0")) or None
            tmpl_path = os.path.join(base_dir, d.get("template", ""))
            targ_path = os.path.join(base_dir, d.get("target", ""))
            for p in (tmpl_path, targ_path):
                if not os.path.isfile(p):
                    raise CliError("E_IO", f"curve file not found: {p}")
            template = curves.DiscreteCurve(curves.read_curve_csv(tmpl_path))
            target = curves.DiscreteCurve(curves.read_curve_csv(targ_path))
            payload = {"template": template, "target": target,
                       "kernel": kernel, "nu_modes": nu_modes}
    except (ValueError, UnreduceError) as exc:
        if isinstance(exc, CliError):
            raise
        raise CliError("E_PARAM", str(exc)) from None
    return Scenario(kind, steps, tol, max_iter, payload, base_dir)


def _state_row(kind: str, state) -> list:
    if kind == "so3":
        return list(state[0].ravel()) + list(state[1].ravel())
    if kind == "se3":
        Q, r, P, p = se3.unpack_state(state)
        return list(Q.ravel()) + list(r) + list(P.ravel()) + list(p)
    return list(state[0].ravel()) + list(state[1].ravel())


def _state_header(kind: str, state) -> list:
    if kind == "so3":
        return ([f"q{i}{j}" for i in range(3) for j in range(3)]
                + [f"p{i}{j}" for i in range(3) for j in range(3)])
    if kind == "se3":
        return ([f"q{i}{j}" for i in range(3) for j in range(3)] + ["rx", "ry", "rz"]
                + [f"p{i}{j}" for i in range(3) for j in range(3)] + ["px", "py", "pz"])
    n = state.shape[-2]
    return ([c for i in range(n) for c in (f"x{i}", f"y{i}")]
            + [c for i in range(n) for c in (f"px{i}", f"py{i}")])


def write_trajectory_csv(path: str, kind: str, traj: Trajectory) -> None:
    diag_names = sorted(traj.diagnostics)
    header = ["t"] + _state_header(kind, traj.states[0]) + diag_names
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for k, t in enumerate(traj.times):
            row = [t] + _state_row(kind, traj.states[k])
            row += [traj.diagnostics[name][k] for name in diag_names]
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_trajectory_csv(path: str, kind: str) -> Trajectory:
    if not os.path.exists(path):
        raise CliError("E_IO", f"trajectory file not found: {path}")
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.array([[float(tok) for tok in line.strip().split(",")]
                         for line in fh if line.strip()])
    if data.ndim != 2 or data.shape[1] != len(header) or header[0] != "t":
        raise CliError("E_INCONSISTENT", "malformed trajectory file")
    times = data[:, 0]
    if kind == "so3":
        if data.shape[1] < 19:
            raise CliError("E_INCONSISTENT", "so3 trajectory needs 18 state columns")
        states = np.stack([data[:, 1:10].reshape(-1, 3, 3),
                           data[:, 10:19].reshape(-1, 3, 3)], axis=1)
    elif kind == "se3":
        if data.shape[1] < 25:
            raise CliError("E_INCONSISTENT", "se3 trajectory needs 24 state columns")
        states = np.stack([
            np.concatenate([data[:, 1:10].reshape(-1, 3, 3), data[:, 10:13][:, :, None]], axis=2),
            np.concatenate([data[:, 13:22].reshape(-1, 3, 3), data[:, 22:25][:, :, None]], axis=2),
        ], axis=1)
    else:
        n_cols = sum(1 for name in header if name.startswith("x"))
        if n_cols < 8 or data.shape[1] < 1 + 4 * n_cols:
            raise CliError("E_INCONSISTENT", "curve trajectory has too few state columns")
        n = n_cols
        states = np.stack([data[:, 1:1 + 2 * n].reshape(-1, n, 2),
                           data[:, 1 + 2 * n:1 + 4 * n].reshape(-1, n, 2)], axis=1)
    try:
        return Trajectory(times=times, states=states)
    except ValueError as exc:
        raise CliError("E_INCONSISTENT", str(exc)) from None


def verify_checks(scenario: Scenario, traj: Trajectory) -> list:
    """Recompute every applicable invariant from the raw states.

    Returns (name, measured, tolerance, passed) tuples; tolerances come
    from :data:`TOLERANCES`.
    """
    checks = []

    def drift(series):
        series = np.asarray(series, dtype=float)
        return float(np.max(np.abs(series - series[0])))

    def add(name, value):
        tol = TOLERANCES[name]
        checks.append((name, float(value), tol, bool(value <= tol)))

    if scenario.kind == "so3":
        problem = scenario.payload
        Q, P = traj.states[:, 0], traj.states[:, 1]
        add("noether_right", drift(lie.momentum_right_z(Q, P)))
        add("noether_left_norm", drift(np.linalg.norm(lie.momentum_left_so3(Q, P), axis=(-2, -1))))
        add("energy_drift", drift(so3.energy(Q, P, problem.inertia)))
        add("orthogonality", np.max(np.linalg.norm(
            np.swapaxes(Q, -1, -2) @ Q - np.eye(3), axis=(-2, -1))))
        add("ep_residual", np.max(so3.euler_poincare_residual(traj, problem.inertia)))
        add("equivalence_residual", np.max(ode_residual(traj, so3._packed_rhs(problem.inertia))))
    elif scenario.kind == "se3":
        problem = scenario.payload
        Q, r, P, p = se3.unpack_state(traj.states)
        wv, v = se3.controls(Q, r, P, p, problem.metric)
        m_rot = lie.vee(lie.momentum_left_so3(Q, P)) - 0.5 * np.cross(r, p)
        add("noether_right", drift(lie.momentum_right_z(Q, P)))
        add("noether_trans_norm", drift(np.linalg.norm(p, axis=-1)))
        add("noether_casimir", drift(np.sum(m_rot * p, axis=-1)))
        add("energy_drift", drift(se3.energy(lie.hat(wv), v, problem.metric)))
        add("orthogonality", np.max(np.linalg.norm(
            np.swapaxes(Q, -1, -2) @ Q - np.eye(3), axis=(-2, -1))))
        add("equivalence_residual", np.max(ode_residual(traj, se3._packed_rhs(problem.metric))))
    else:
        kernel = scenario.payload["kernel"]
        n = scenario.payload["template"].size
        if traj.states.shape[-2] != n:
            raise CliError("E_INCONSISTENT",
                           f"trajectory has {traj.states.shape[-2]} nodes, scenario has {n}")
        q, p = traj.states[:, 0], traj.states[:, 1]
        js = np.stack([curves.tangential_momentum(q[k], p[k]) for k in range(q.shape[0])])
        add("noether_js", float(np.max(np.abs(js - js[0]))))
        lin = np.sum(p, axis=1) / n
        add("noether_linear_momentum", float(np.max(np.linalg.norm(lin - lin[0], axis=-1))))
        ham = np.array([curves.hamiltonian(q[k], p[k], kernel) for k in range(q.shape[0])])
        add("energy_drift", drift(ham))
        add("equivalence_residual", np.max(ode_residual(traj, curves._packed_rhs(kernel))))
    return checks


def _write_verify_report(path: str, checks) -> None:
    with open(path, "w") as fh:
        for name, value, tol, passed in checks:
            fh.write(f"{name} value={_fmt(value)} tolerance={_fmt(tol)} "
                     f"status={'pass' if passed else 'fail'}\n")
        fh.write(f"overall = {'pass' if all(c[3] for c in checks) else 'fail'}\n")


def _solve(scenario: Scenario):
    if scenario.kind == "so3":
        return so3.solve(scenario.payload, scenario.opts)
    if scenario.kind == "se3":
        return se3.solve(scenario.payload, scenario.opts)
    d = scenario.payload
    return curves.solve_matching(d["template"], d["target"], d["kernel"],
                                 scenario.opts, nu_modes=d["nu_modes"])


def _write_summary(path: str, scenario: Scenario, result) -> None:
    lines = [
        ("kind", scenario.kind),
        ("converged", "true"),
        ("iterations", str(result.iterations)),
        ("residual_norm", _fmt(result.residual_norm)),
        ("cost", _fmt(result.cost)),
        ("steps", str(scenario.steps)),
        ("tol", _fmt(scenario.tol)),
    ]
    for label, value in zip(result.labels, result.unknowns):
        lines.append((label, _fmt(value)))
    for name in sorted(result.diagnostics):
        lines.append((f"diag_{name}", _fmt(result.diagnostics[name])))
    lines.append(("unknowns", " ".join(_fmt(v) for v in result.unknowns)))
    with open(path, "w") as fh:
        for key, value in lines:
            fh.write(f"{key} = {value}\n")


def run_scenario(path: str, steps: int | None = None, tol: float | None = None,
                 out_dir: str | None = None) -> int:
    scenario = load_scenario(path, steps=steps, tol=tol)
    out = out_dir or os.path.splitext(os.path.basename(path))[0] + "_out"
    os.makedirs(out, exist_ok=True)
    try:
        result = _solve(scenario)
    except NoConvergence as exc:
        print(f"E_NOCONV: {exc}", file=sys.stderr)
        return 2
    _write_summary(os.path.join(out, "summary.txt"), scenario, result)
    write_trajectory_csv(os.path.join(out, "trajectory.csv"), scenario.kind,
                         result.trajectories["reconstructed"])
    write_trajectory_csv(os.path.join(out, "trajectory_reparam.csv"), scenario.kind,
                         result.trajectories["reparam"])
    checks = verify_checks(scenario, result.trajectories["reconstructed"])
    _write_verify_report(os.path.join(out, "verify.txt"), checks)
    return 0


def _run_one(args) -> int:
    path, steps, tol, out_dir = args
    try:
        return run_scenario(path, steps=steps, tol=tol, out_dir=out_dir)
    except CliError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1
    except NoConvergence as exc:
        print(f"E_NOCONV: {exc}", file=sys.stderr)
        return 2
    except UnreduceError as exc:
        print(f"E_SOLVER: {exc}", file=sys.stderr)
        return 2


def cmd_run(args) -> int:
    target = args.scenario
    if os.path.isdir(target):
        paths = sorted(os.path.join(target, f) for f in os.listdir(target)
                       if f.endswith(".ini"))
        if not paths:
            raise CliError("E_IO", f"no scenario files in {target}")
        base_out = args.out_dir or "out"
        jobs = [(p, args.steps, args.tol,
                 os.path.join(base_out, os.path.splitext(os.path.basename(p))[0]))
                for p in paths]
        if args.jobs > 1:
            with Pool(args.jobs) as pool:
                codes = pool.map(_run_one, jobs)
        else:
            codes = [_run_one(j) for j in jobs]
        return max(codes)
    return run_scenario(target, steps=args.steps, tol=args.tol, out_dir=args.out_dir)


def cmd_verify(args) -> int:
    scenario = load_scenario(args.scenario)
    traj = read_trajectory_csv(args.trajectory, scenario.kind)
    checks = verify_checks(scenario, traj)
    for name, value, tol, passed in checks:
        print(f"{name} value={_fmt(value)} tolerance={_fmt(tol)} "
              f"status={'pass' if passed else 'fail'}")
    ok = all(c[3] for c in checks)
    print(f"overall = {'pass' if ok else 'fail'}")
    return 0 if ok else 2


def _demo_circle(n: int, r: float = 1.0) -> np.ndarray:
    s = np.arange(n) / n
    return np.stack([r * np.cos(2 * np.pi * s), r * np.sin(2 * np.pi * s)], axis=1)


def cmd_demo(args) -> int:
    """Write the bundled demo scenarios (targets seeded by UNREDUCE_SEED)."""
    seed = int(os.environ.get("UNREDUCE_SEED", "0"))
    rng = np.random.default_rng(seed)
    out = args.out_dir or "scenarios"
    os.makedirs(out, exist_ok=True)
    eye = "1 0 0  0 1 0  0 0 1"

    def mat(m):
        return " ".join(_fmt(v) for v in np.asarray(m).ravel())

    axis = rng.standard_normal(3)
    axis *= rng.uniform(0.8, 1.6) / np.linalg.norm(axis)
    q1 = lie.exp_so3(lie.hat(axis))
    with open(os.path.join(out, "so3_twist.ini"), "w") as fh:
        fh.write("[scenario]\nkind = so3\nsteps = 400\ntol = 1e-8\n\n"
                 f"[so3]\nq0 = {eye}\nq1 = {mat(q1)}\n"
                 "inertia = 1 0 0  0 2 0  0 0 3\n")

    axis2 = rng.standard_normal(3)
    axis2 *= rng.uniform(0.5, 1.2) / np.linalg.norm(axis2)
    q1r = lie.exp_so3(lie.hat(axis2))
    trans = rng.uniform(-1.0, 1.0, size=3)
    with open(os.path.join(out, "se3_dock.ini"), "w") as fh:
        fh.write("[scenario]\nkind = se3\nsteps = 400\ntol = 1e-8\n\n"
                 f"[se3]\nq0_rot = {eye}\nq0_trans = 0 0 0\n"
                 f"q1_rot = {mat(q1r)}\nq1_trans = {mat(trans)}\n"
                 "inertia = 1 0 0  0 1.5 0  0 0 2\ncoupling = 0.2 -0.1 0.15\nscalar = 1.2\n")

    n = 32
    circle = _demo_circle(n)
    curves.write_curve_csv(os.path.join(out, "circle_template.csv"), circle)
    curves.write_curve_csv(os.path.join(out, "circle_target.csv"),
                           np.roll(circle, -4, axis=0))
    with open(os.path.join(out, "curve_shift.ini"), "w") as fh:
        fh.write("[scenario]\nkind = curve\nsteps = 200\ntol = 1e-8\n\n"
                 "[curve]\ntemplate = circle_template.csv\ntarget = circle_target.csv\n"
                 "sigma = 0.5\nnu_modes = 0\n")
    print(f"wrote demo scenarios to {out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="unreduce",
        description="Solve geodesic boundary value problems whose endpoint "
                    "is fixed only up to a symmetry action.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="solve a scenario file (or directory of them)")
    p_run.add_argument("scenario")
    p_run.add_argument("--steps", type=int, default=None)
    p_run.add_argument("--tol", type=float, default=None)
    p_run.add_argument("--out-dir", default=None)
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.set_defaults(func=cmd_run)

    p_verify = sub.add_parser("verify", help="re-check conservation laws of a trajectory")
    p_verify.add_argument("trajectory")
    p_verify.add_argument("scenario")
    p_verify.set_defaults(func=cmd_verify)

    p_demo = sub.add_parser("demo", help="write the bundled demo scenarios")
    p_demo.add_argument("--out-dir", default=None)
    p_demo.set_defaults(func=cmd_demo)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1
    except NoConvergence as exc:
        print(f"E_NOCONV: {exc}", file=sys.stderr)
        return 2
    except UnreduceError as exc:
        print(f"E_SOLVER: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
