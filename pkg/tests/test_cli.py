import csv
import filecmp
import json
import os

import numpy as np
import pytest

from snake_locomanip import cli

ARTIFACTS = ["robot_pose.csv", "box_pose.csv", "joints.csv",
             "contacts_robot_ground.csv", "contacts_box_ground.csv",
             "contacts_robot_box.csv", "metrics.json"]


def _run(argv):
    return cli.main(argv)


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def sim_run(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("sim") / "run")
    rc = _run(["simulate", "--gait", "c_roll", "--duration", "1.0", "--out", out])
    assert rc == 0
    return out


def test_simulate_artifacts_present(sim_run):
    for name in ARTIFACTS + ["run_manifest.json"]:
        assert os.path.exists(os.path.join(sim_run, name)), name


def test_simulate_equal_cadence(sim_run):
    lens = {name: len(_rows(os.path.join(sim_run, name)))
            for name in ("robot_pose.csv", "box_pose.csv", "joints.csv")}
    assert len(set(lens.values())) == 1
    # timestamps strictly increasing
    t = [float(r[0]) for r in _rows(os.path.join(sim_run, "robot_pose.csv"))[1:]]
    assert np.all(np.diff(t) > 0)


def test_simulate_manifest(sim_run):
    with open(os.path.join(sim_run, "run_manifest.json")) as fh:
        man = json.load(fh)
    assert man["scenario"] == "flat_push"
    assert man["gait"] == "c_roll"
    assert man["status"] == 0
    assert len(man["constants_hash"]) == 64
    assert man["config"]["contact"]["k"] == 1e4


def test_simulate_deterministic(sim_run, tmp_path):
    out2 = str(tmp_path / "run2")
    rc = _run(["simulate", "--gait", "c_roll", "--duration", "1.0", "--out", out2])
    assert rc == 0
    for name in ARTIFACTS:
        assert filecmp.cmp(os.path.join(sim_run, name), os.path.join(out2, name),
                           shallow=False), name


def test_bad_config_json(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    assert _run(["validate", "--config", str(bad)]) == 1


def test_bad_config_values(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"integrator": {"dt": -1.0}}))
    assert _run(["validate", "--config", str(bad)]) == 1


def test_unknown_gait_in_config(tmp_path):
    bad = tmp_path / "gait.json"
    bad.write_text(json.dumps({"gait": {"name": "moonwalk"}}))
    rc = _run(["simulate", "--config", str(bad), "--duration", "0.1",
               "--out", str(tmp_path / "out")])
    assert rc == 1


def test_missing_config_file(tmp_path):
    assert _run(["validate", "--config", str(tmp_path / "absent.json")]) == 1


def test_numerical_abort_exit_code(tmp_path):
    cfgp = tmp_path / "blow.json"
    cfgp.write_text(json.dumps({"contact": {"k": 1e18, "b": 1e18}}))
    out = str(tmp_path / "out")
    rc = _run(["simulate", "--config", str(cfgp), "--gait", "c_roll",
               "--duration", "0.5", "--out", out])
    assert rc == 2
    with open(os.path.join(out, "run_manifest.json")) as fh:
        man = json.load(fh)
    assert man["status"] != 0  # partial outputs plus error record


def test_plan_budget_one(tmp_path):
    cfgp = tmp_path / "plan.json"
    cfgp.write_text(json.dumps({"planner": {"budget": 1}}))
    out = str(tmp_path / "plan_out")
    rc = _run(["plan", "--config", str(cfgp), "--goal", "0.8,0.8,0.1",
               "--duration", "1.0", "--out", out])
    assert rc == 0
    with open(os.path.join(out, "planner_result.json")) as fh:
        res = json.load(fh)
    assert res["n_evaluations"] == 1
    hist = res["cost_history"]
    assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))
    # manifest goal error must match recomputation from box_pose.csv
    with open(os.path.join(out, "run_manifest.json")) as fh:
        man = json.load(fh)
    last = _rows(os.path.join(out, "box_pose.csv"))[-1]
    pos = np.array([float(v) for v in last[1:4]])
    err = np.linalg.norm(pos - np.array(res["goal"]))
    assert man["goal_error"] == pytest.approx(err, abs=1e-12)


def test_plan_bad_goal(tmp_path):
    rc = _run(["plan", "--goal", "1,2", "--out", str(tmp_path / "x")])
    assert rc == 1


@pytest.fixture(scope="module")
def two_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("cmp")
    outs = []
    for g in ("c_roll", "sidewinding"):
        out = str(root / g)
        assert _run(["simulate", "--gait", g, "--duration", "1.0", "--out", out]) == 0
        outs.append(out)
    return outs


def test_compare_outputs(two_runs, tmp_path):
    out = str(tmp_path / "cmp_out")
    rc = _run(["compare", "--runs", ",".join(two_runs), "--out", out])
    assert rc == 0
    for name in ("work_efficiency.csv", "power.csv", "distance.csv", "ranking.json"):
        assert os.path.exists(os.path.join(out, name)), name
    header = _rows(os.path.join(out, "work_efficiency.csv"))[0]
    assert "c_roll_w_box" in header and "sidewinding_w_loc" in header
    with open(os.path.join(out, "ranking.json")) as fh:
        ranking = json.load(fh)
    assert set(ranking["w_box"]) == {"c_roll", "sidewinding"}
    assert ranking["warnings"] == []


def test_compare_needs_two(two_runs, tmp_path):
    rc = _run(["compare", "--runs", two_runs[0], "--out", str(tmp_path / "o")])
    assert rc == 1


def test_compare_unequal_durations(two_runs, tmp_path):
    short = str(tmp_path / "short")
    assert _run(["simulate", "--gait", "c_roll", "--duration", "0.5",
                 "--out", short]) == 0
    out = str(tmp_path / "cmp")
    rc = _run(["compare", "--runs", f"{two_runs[1]},{short}", "--out", out])
    assert rc == 0
    with open(os.path.join(out, "ranking.json")) as fh:
        ranking = json.load(fh)
    assert ranking["warnings"]
    assert ranking["distance_metric"] == "box_distance_per_s"
