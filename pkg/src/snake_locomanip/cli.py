"""Command-line scenario runner.

Subcommands: ``simulate`` (roll out a scenario and export trajectory/contact
CSVs plus metrics), ``plan`` (shooting-method search toward a box goal),
``compare`` (aggregate several finished runs into figure data), ``validate``
(config check only). Exit codes: 0 ok, 1 config error, 2 numerical abort,
3 planner failure.
"""

import argparse
import csv
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__, engine, gait, metrics, planner
from . import contact as ct
from . import model as mdl
from .config import ConfigError, load_config

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_PLANNER = 3

POSE_HEADER = ["t", "x", "y", "z", "qw", "qx", "qy", "qz"]
CONTACT_HEADER = ["t", "body_a", "body_b", "feature",
                  "px", "py", "pz", "f_n", "f_t1", "f_t2"]


def _fmt(v):
    return repr(float(v))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _pose_rows(traj, cols):
    rows = []
    for i in range(len(traj)):
        rows.append([f"{traj.t[i]:.6f}"] + [_fmt(traj.q[i, j]) for j in cols])
    return rows


def _contact_rows(model, scene, traj, cfg):
    """Recompute contacts at every sampled state and split them into the
    robot-ground / box-ground / robot-box logs."""
    params = ct.ContactParams.from_config(cfg)
    from .kinematics import BOX_BODY

    buckets = {"robot_ground": [], "box_ground": [], "robot_box": []}
    for i in range(len(traj)):
        s = mdl.SystemState(q=traj.q[i].copy(), u=traj.u[i].copy())
        s.latched = bool(traj.latched[i])
        cs = ct.resolve_forces(ct.detect_contacts(model, scene, s, params), params)
        t = f"{traj.t[i]:.6f}"
        for pt in cs.points:
            if pt.body_a == BOX_BODY:
                key = "robot_box"
            elif pt.body_b == BOX_BODY:
                key = "box_ground"
            else:
                key = "robot_ground"
            buckets[key].append(
                [t, pt.body_a, pt.body_b, pt.feature,
                 _fmt(pt.p[0]), _fmt(pt.p[1]), _fmt(pt.p[2]),
                 _fmt(pt.f_N), _fmt(pt.f_T[0]), _fmt(pt.f_T[1])])
    return buckets


def _constants_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _metrics_payload(traj):
    led = metrics.EnergyLedger.from_trajectory(traj)
    payload = metrics.gait_summary(traj)
    payload["work_convention"] = metrics.work_convention
    payload["w_loc_signed"] = float(led.w_loc_signed[-1]) if len(traj) else 0.0
    payload["status"] = int(traj.status)
    payload["series"] = {
        "t": [float(v) for v in led.t],
        "power": [float(v) for v in led.power],
        "w_loc": [float(v) for v in led.w_loc],
        "w_box": [float(v) for v in led.w_box],
        "path_length": [float(v) for v in led.path_length],
    }
    return payload


def _write_run_artifacts(out, model, scene, traj, cfg, manifest_extra=None):
    os.makedirs(out, exist_ok=True)
    _write_csv(os.path.join(out, "robot_pose.csv"), POSE_HEADER,
               _pose_rows(traj, range(0, 7)))
    _write_csv(os.path.join(out, "box_pose.csv"), POSE_HEADER,
               _pose_rows(traj, range(18, 25)))
    joints_header = (["t"] + [f"q{k + 1}" for k in range(11)]
                     + [f"qd{k + 1}" for k in range(11)]
                     + [f"tau{k + 1}" for k in range(11)])
    rows = []
    for i in range(len(traj)):
        rows.append([f"{traj.t[i]:.6f}"]
                    + [_fmt(v) for v in traj.q[i, 7:18]]
                    + [_fmt(v) for v in traj.u[i, 6:17]]
                    + [_fmt(v) for v in traj.tau[i]])
    _write_csv(os.path.join(out, "joints.csv"), joints_header, rows)
    buckets = _contact_rows(model, scene, traj, cfg)
    for key, recs in buckets.items():
        _write_csv(os.path.join(out, f"contacts_{key}.csv"), CONTACT_HEADER, recs)
    with open(os.path.join(out, "metrics.json"), "w") as fh:
        json.dump(_metrics_payload(traj), fh, indent=1)
    manifest = {
        "version": __version__,
        "backend": engine.BACKEND,
        "config": cfg,
        "constants_hash": _constants_hash(cfg),
        "n_samples": len(traj),
        "status": int(traj.status),
        "status_step": int(traj.status_step),
    }
    if manifest_extra:
        manifest.update(manifest_extra)
    with open(os.path.join(out, "run_manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1)


def _load_run_config(args):
    overrides = {}
    if getattr(args, "gait", None):
        overrides.setdefault("gait", {})["name"] = args.gait
    if getattr(args, "mirror", False):
        overrides.setdefault("gait", {})["mirror"] = True
    if getattr(args, "budget", None) is not None:
        overrides.setdefault("planner", {})["budget"] = args.budget
    return load_config(args.config, overrides)


def run_simulate(args):
    cfg = _load_run_config(args)
    scenario = args.scenario
    gname = cfg["gait"]["name"]
    if gname not in gait.PRESET_NAMES:
        raise ConfigError(f"unknown gait {gname!r}")
    model = mdl.build_default_robot(cfg)
    scene = mdl.build_scene(cfg, scenario)
    mirror = cfg["gait"]["mirror"]
    kwargs = {}
    if scenario in ("flat_push", "ramp_ascent") and args.duration is not None:
        kwargs["duration"] = args.duration
    timeline = gait.timeline_for_scenario(
        scenario, gname, mirror=mirror, frequency=cfg["gait"]["frequency"], **kwargs)
    duration = args.duration if args.duration is not None else timeline.duration
    if duration <= 0:
        raise ConfigError("duration must be positive")
    push_sign = -1.0 if mirror else 1.0
    state0 = mdl.initial_pose(scenario, model, scene, cfg, push_sign=push_sign)
    traj = engine.rollout(model, scene, state0, timeline, duration, cfg)
    extra = {"scenario": scenario, "gait": gname, "duration": duration,
             "mirror": mirror}
    _write_run_artifacts(args.out, model, scene, traj, cfg, extra)
    if traj.status != 0:
        print(f"numerical abort at step {traj.status_step}; partial outputs in {args.out}",
              file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def run_plan(args):
    cfg = _load_run_config(args)
    try:
        goal = np.array([float(v) for v in args.goal.split(",")])
        if goal.shape != (3,):
            raise ValueError
    except ValueError:
        raise ConfigError("--goal must be x,y,z")
    model = mdl.build_default_robot(cfg)
    scene = mdl.build_scene(cfg, "flat_push")
    state0 = mdl.initial_pose("flat_push", model, scene, cfg)
    seed_name = cfg["planner"]["seed_gait"]
    if seed_name not in gait.PRESET_NAMES:
        raise ConfigError(f"unknown planner.seed_gait {seed_name!r}")
    horizon = args.duration if args.duration is not None else 8.0
    problem = planner.ShootingProblem(
        model=model, scene=scene, state0=state0, goal=goal, horizon=horizon,
        weights=tuple(cfg["planner"]["weights"]), cfg=cfg)
    try:
        result = planner.shoot(problem, gait.preset(seed_name).params,
                               cfg["planner"]["budget"])
    except RuntimeError as exc:
        print(f"planner failed: {exc}", file=sys.stderr)
        return EXIT_PLANNER
    extra = {
        "scenario": "flat_push",
        "gait": seed_name,
        "duration": horizon,
        "goal": [float(v) for v in goal],
        "goal_error": result.goal_error,
        "planner_cost": result.cost,
    }
    _write_run_artifacts(args.out, model, scene, result.trajectory, cfg, extra)
    payload = {
        "decision": [float(v) for v in result.decision],
        "cost": result.cost,
        "cost_history": [float(v) for v in result.cost_history],
        "n_evaluations": result.n_evaluations,
        "goal": [float(v) for v in goal],
        "goal_error": result.goal_error,
        "converged": result.converged,
        "seed_gait": seed_name,
        "params": {
            "amplitude_yaw": result.params.amplitude_yaw,
            "amplitude_pitch": result.params.amplitude_pitch,
            "frequency": result.params.frequency,
            "phase": list(result.params.phase),
            "offset": list(result.params.offset),
        },
    }
    with open(os.path.join(args.out, "planner_result.json"), "w") as fh:
        json.dump(payload, fh, indent=1)
    if result.trajectory.status != 0:
        return EXIT_NUMERICAL
    return EXIT_OK


def run_compare(args):
    run_dirs = [d for d in args.runs.split(",") if d]
    if len(run_dirs) < 2:
        raise ConfigError("compare needs at least two run directories")
    runs = {}
    for d in run_dirs:
        mpath = os.path.join(d, "metrics.json")
        man_path = os.path.join(d, "run_manifest.json")
        if not os.path.exists(mpath) or not os.path.exists(man_path):
            raise ConfigError(f"{d} is not a finished run directory")
        with open(mpath) as fh:
            m = json.load(fh)
        with open(man_path) as fh:
            man = json.load(fh)
        name = man.get("gait", os.path.basename(os.path.normpath(d)))
        if man.get("mirror"):
            name += "_mirrored"
        runs[name] = m
    os.makedirs(args.out, exist_ok=True)

    durations = {name: m["duration"] for name, m in runs.items()}
    equal_time = len({round(v, 9) for v in durations.values()}) == 1
    warnings = []
    if not equal_time:
        warnings.append("durations differ; distances normalized per second")

    # work-efficiency curves: x = W_box(t), y = W_loc(t), one pair per run
    names = list(runs)
    n_rows = max(len(runs[n]["series"]["t"]) for n in names)
    header = []
    for n in names:
        header += [f"{n}_w_box", f"{n}_w_loc"]
    rows = []
    for i in range(n_rows):
        row = []
        for n in names:
            s = runs[n]["series"]
            j = min(i, len(s["t"]) - 1)
            row += [_fmt(s["w_box"][j]), _fmt(s["w_loc"][j])]
        rows.append(row)
    _write_csv(os.path.join(args.out, "work_efficiency.csv"), header, rows)

    header = ["t"] + [f"{n}_power" for n in names]
    rows = []
    base = runs[names[0]]["series"]["t"]
    for i in range(n_rows):
        row = [f"{base[min(i, len(base) - 1)]:.6f}"]
        for n in names:
            s = runs[n]["series"]
            row.append(_fmt(s["power"][min(i, len(s["power"]) - 1)]))
        rows.append(row)
    _write_csv(os.path.join(args.out, "power.csv"), header, rows)

    rows = []
    for n in names:
        m = runs[n]
        per_s = m["box_distance"] / m["duration"] if m["duration"] > 0 else 0.0
        rows.append([n, _fmt(m["box_distance"]), _fmt(per_s),
                     _fmt(m["w_loc"]), _fmt(m["w_box"]), _fmt(m["peak_power"])])
    _write_csv(os.path.join(args.out, "distance.csv"),
               ["run", "box_distance", "box_distance_per_s",
                "w_loc", "w_box", "peak_power"], rows)

    dist_key = "box_distance" if equal_time else "box_distance_per_s"

    def _dist(n):
        m = runs[n]
        return m["box_distance"] if equal_time else m["box_distance"] / m["duration"]

    ranking = {
        "distance_metric": dist_key,
        "warnings": warnings,
        "box_distance": sorted(names, key=_dist, reverse=True),
        "w_box": sorted(names, key=lambda n: runs[n]["w_box"], reverse=True),
        "w_loc": sorted(names, key=lambda n: runs[n]["w_loc"], reverse=True),
        "peak_power": sorted(names, key=lambda n: runs[n]["peak_power"], reverse=True),
        "slope": sorted(names, key=lambda n: runs[n]["slope"]),
    }
    with open(os.path.join(args.out, "ranking.json"), "w") as fh:
        json.dump(ranking, fh, indent=1)
    return EXIT_OK


def run_validate(args):
    load_config(args.config)
    print("config ok")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="snake-locomanip")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="roll out a scenario and export artifacts")
    sim.add_argument("--config", default=None)
    sim.add_argument("--scenario", default="flat_push",
                     choices=["flat_push", "lift_place", "pick_place", "ramp_ascent"])
    sim.add_argument("--gait", default=None, choices=list(gait.PRESET_NAMES))
    sim.add_argument("--mirror", action="store_true")
    sim.add_argument("--duration", type=float, default=None)
    sim.add_argument("--out", default="run_out")
    sim.set_defaults(func=run_simulate)

    plan = sub.add_parser("plan", help="shooting-method search toward a box goal")
    plan.add_argument("--config", default=None)
    plan.add_argument("--goal", required=True, help="box target position x,y,z")
    plan.add_argument("--budget", type=int, default=None)
    plan.add_argument("--duration", type=float, default=None)
    plan.add_argument("--out", default="plan_out")
    plan.set_defaults(func=run_plan)

    cmp_ = sub.add_parser("compare", help="aggregate finished runs into figure data")
    cmp_.add_argument("--runs", required=True, help="comma-separated run directories")
    cmp_.add_argument("--out", default="compare_out")
    cmp_.set_defaults(func=run_compare)

    val = sub.add_parser("validate", help="check a config file")
    val.add_argument("--config", default=None)
    val.set_defaults(func=run_validate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
