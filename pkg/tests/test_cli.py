import os

import numpy as np
import pytest

from unreduce import cli
from unreduce.cli import CliError, load_scenario, read_trajectory_csv


def write_identity_so3(path, tol="1e-8"):
    eye = "1 0 0  0 1 0  0 0 1"
    with open(path, "w") as fh:
        fh.write(f"[scenario]\nkind = so3\nsteps = 400\ntol = {tol}\n\n"
                 f"[so3]\nq0 = {eye}\nq1 = {eye}\ninertia = 1 0 0  0 2 0  0 0 3\n")


def read_summary(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            key, _, value = line.partition(" = ")
            out[key.strip()] = value.strip()
    return out


def test_identity_scenario_runs_clean(tmp_path):
    scen = tmp_path / "identity.ini"
    write_identity_so3(scen)
    out = tmp_path / "out"
    code = cli.main(["run", str(scen), "--out-dir", str(out)])
    assert code == 0
    summary = read_summary(out / "summary.txt")
    assert summary["kind"] == "so3"
    assert float(summary["cost"]) == 0.0
    report = (out / "verify.txt").read_text()
    assert "overall = pass" in report
    # constant solution: every drift is exactly zero
    for line in report.splitlines():
        if line.startswith(("noether", "energy", "orthogonality", "ep_", "equivalence")):
            assert "value=0 " in line


def test_malformed_sigma_rejected(tmp_path, capsys):
    scen = tmp_path / "bad.ini"
    with open(scen, "w") as fh:
        fh.write("[scenario]\nkind = curve\n\n[curve]\ntemplate = a.csv\n"
                 "target = b.csv\nsigma = -0.5\n")
    # curve files must exist before sigma is validated
    for name in ("a.csv", "b.csv"):
        with open(tmp_path / name, "w") as fh:
            for k in range(8):
                fh.write(f"{np.cos(2*np.pi*k/8)},{np.sin(2*np.pi*k/8)}\n")
    code = cli.main(["run", str(scen), "--out-dir", str(tmp_path / "out")])
    assert code == 1
    assert "E_PARAM" in capsys.readouterr().err


def test_missing_curve_file_rejected(tmp_path, capsys):
    scen = tmp_path / "missing.ini"
    with open(scen, "w") as fh:
        fh.write("[scenario]\nkind = curve\n\n[curve]\ntemplate = nope.csv\n"
                 "target = nope.csv\nsigma = 0.5\n")
    code = cli.main(["run", str(scen), "--out-dir", str(tmp_path / "out")])
    assert code == 1
    assert "E_IO" in capsys.readouterr().err


def test_steps_floor_enforced(tmp_path, capsys):
    scen = tmp_path / "few.ini"
    write_identity_so3(scen)
    code = cli.main(["run", str(scen), "--steps", "5", "--out-dir", str(tmp_path / "out")])
    assert code == 1
    assert "E_PARAM" in capsys.readouterr().err


def test_demo_then_run_so3_and_verify(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("UNREDUCE_SEED", "0")
    assert cli.main(["demo", "--out-dir", str(tmp_path)]) == 0
    capsys.readouterr()
    scen = tmp_path / "so3_twist.ini"
    out = tmp_path / "out"
    assert cli.main(["run", str(scen), "--out-dir", str(out)]) == 0
    assert cli.main(["verify", str(out / "trajectory.csv"), str(scen)]) == 0
    assert "overall = pass" in capsys.readouterr().out


def test_corrupted_trajectory_fails_noether(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("UNREDUCE_SEED", "0")
    cli.main(["demo", "--out-dir", str(tmp_path)])
    scen = tmp_path / "so3_twist.ini"
    out = tmp_path / "out"
    cli.main(["run", str(scen), "--out-dir", str(out)])
    traj_path = out / "trajectory.csv"
    with open(traj_path) as fh:
        lines = fh.readlines()
    # scale the momentum block (columns 10..18) by two from midway on
    n_rows = len(lines) - 1
    for k in range(1 + n_rows // 2, len(lines)):
        cols = lines[k].strip().split(",")
        for j in range(10, 19):
            cols[j] = f"{2.0 * float(cols[j]):.17g}"
        lines[k] = ",".join(cols) + "\n"
    corrupted = tmp_path / "corrupted.csv"
    with open(corrupted, "w") as fh:
        fh.writelines(lines)
    capsys.readouterr()
    code = cli.main(["verify", str(corrupted), str(scen)])
    captured = capsys.readouterr().out
    assert code == 2
    noether_lines = [ln for ln in captured.splitlines()
                     if ln.startswith("noether") and "fail" in ln]
    assert noether_lines, captured


def test_verify_dimension_mismatch(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("UNREDUCE_SEED", "0")
    cli.main(["demo", "--out-dir", str(tmp_path)])
    out = tmp_path / "out"
    cli.main(["run", str(tmp_path / "so3_twist.ini"), "--out-dir", str(out)])
    code = cli.main(["verify", str(out / "trajectory.csv"), str(tmp_path / "se3_dock.ini")])
    assert code == 1
    assert "E_INCONSISTENT" in capsys.readouterr().err


def test_run_directory_with_jobs(tmp_path):
    scen_dir = tmp_path / "scenarios"
    os.makedirs(scen_dir)
    write_identity_so3(scen_dir / "a.ini")
    write_identity_so3(scen_dir / "b.ini")
    out = tmp_path / "out"
    code = cli.main(["run", str(scen_dir), "--out-dir", str(out), "--jobs", "2"])
    assert code == 0
    for stem in ("a", "b"):
        assert (out / stem / "summary.txt").exists()


def test_scenario_loading_errors(tmp_path):
    with pytest.raises(CliError):
        load_scenario(str(tmp_path / "absent.ini"))
    bad = tmp_path / "nokind.ini"
    with open(bad, "w") as fh:
        fh.write("[scenario]\nsteps = 100\n")
    with pytest.raises(CliError):
        load_scenario(str(bad))


def test_trajectory_round_trip_is_exact(tmp_path, monkeypatch):
    monkeypatch.setenv("UNREDUCE_SEED", "0")
    cli.main(["demo", "--out-dir", str(tmp_path)])
    scen_path = str(tmp_path / "so3_twist.ini")
    out = tmp_path / "out"
    cli.main(["run", scen_path, "--out-dir", str(out)])
    scenario = load_scenario(scen_path)
    traj = read_trajectory_csv(str(out / "trajectory.csv"), scenario.kind)
    second = tmp_path / "again.csv"
    cli.write_trajectory_csv(str(second), scenario.kind, traj)
    reread = read_trajectory_csv(str(second), scenario.kind)
    assert np.array_equal(traj.states, reread.states)
    assert np.array_equal(traj.times, reread.times)
