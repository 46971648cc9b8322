"""Time the simulation kernel on both backends.

Rolls the same c_roll flat_push scenario with the compiled core and the
pure-python fallback and reports wall time per step and the speedup.

Usage: python benchmarks/bench_kernel.py [--duration 2.0] [--repeats 3]
"""

import argparse
import time

import numpy as np

from snake_locomanip import engine, gait
from snake_locomanip import model as mdl


def time_backend(backend, duration, repeats):
    robot = mdl.build_default_robot()
    scene = mdl.build_scene(scenario="flat_push")
    state0 = mdl.initial_pose("flat_push")
    tl = gait.timeline_for_scenario("flat_push", "c_roll", duration=duration)
    # warm-up (first call pays import/alloc costs)
    engine.rollout(robot, scene, state0, tl, min(duration, 0.1), backend=backend)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        traj = engine.rollout(robot, scene, state0, tl, duration, backend=backend)
        best = min(best, time.perf_counter() - t0)
        assert traj.status == 0
    n_steps = int(round(duration / 1e-4))
    return best, best / n_steps


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--duration", type=float, default=2.0, help="simulated seconds per run")
    ap.add_argument("--repeats", type=int, default=3, help="timing repeats (best kept)")
    args = ap.parse_args()

    rows = []
    for backend in ("python", "compiled"):
        try:
            total, per_step = time_backend(backend, args.duration, args.repeats)
        except RuntimeError as exc:
            print(f"{backend:>9}: unavailable ({exc})")
            continue
        rows.append((backend, total, per_step))
        print(f"{backend:>9}: {total:8.3f} s wall for {args.duration} s sim "
              f"({per_step * 1e6:8.1f} us/step)")
    if len(rows) == 2:
        print(f"  speedup: {rows[0][1] / rows[1][1]:.1f}x")


if __name__ == "__main__":
    main()
