import numpy as np
import pytest

from snake_locomanip import engine, gait, metrics
from snake_locomanip import model as mdl
from snake_locomanip.config import default_config


@pytest.fixture(scope="module")
def croll_traj(robot, scene):
    state = mdl.initial_pose("flat_push")
    tl = gait.timeline_for_scenario("flat_push", "c_roll")
    return engine.rollout(robot, scene, state, tl, 4.0)


def _rest_state():
    return mdl.initial_pose("flat_push")


def test_instantaneous_power_zero_torque():
    state = _rest_state()
    state.u[:] = 1.0
    assert metrics.instantaneous_power(state, np.zeros(11)) == 0.0


def test_instantaneous_power_hand_value():
    state = _rest_state()
    tau = np.zeros(11)
    tau[4] = 2.0
    state.u[6 + 4] = 1.5
    assert metrics.instantaneous_power(state, tau) == pytest.approx(3.0)


def test_instantaneous_power_static_hold():
    state = _rest_state()
    assert metrics.instantaneous_power(state, np.full(11, 5.0)) == 0.0


def test_work_on_box_untouched(robot):
    # box far away: no robot-box contact, no work
    scene = mdl.build_scene()
    state = mdl.initial_pose("flat_push")
    state.q[mdl.Q_BOX_POS][:2] = [5.0, 5.0]
    traj = engine.rollout(robot, scene, state,
                          gait.timeline_for_scenario("flat_push", "c_roll"), 1.0)
    assert np.max(np.abs(metrics.work_on_box(traj))) < 1e-9


def test_work_on_box_missing_log(croll_traj):
    import copy

    broken = copy.copy(croll_traj)
    broken.w_box = None
    with pytest.raises(ValueError):
        metrics.work_on_box(broken)


def test_cumulative_series_monotone(croll_traj):
    led = metrics.EnergyLedger.from_trajectory(croll_traj)
    assert np.all(np.diff(led.w_loc) >= -1e-12)
    assert np.all(np.diff(led.w_loc_signed) >= -1e-12)
    assert np.all(np.diff(led.path_length) >= -1e-12)
    assert np.all(led.power >= 0.0)
    assert led.peak_power == np.max(led.power)


def test_path_length_bounds_displacement(croll_traj):
    led = metrics.EnergyLedger.from_trajectory(croll_traj)
    disp = np.linalg.norm(metrics.box_displacement(croll_traj))
    assert led.path_length[-1] >= disp - 1e-6


def test_energy_sanity(croll_traj):
    # the robot cannot do more work on the box than it expends
    led = metrics.EnergyLedger.from_trajectory(croll_traj)
    assert led.w_box[-1] <= 1.05 * led.w_loc[-1]


def test_signed_work_below_absolute(croll_traj):
    led = metrics.EnergyLedger.from_trajectory(croll_traj)
    assert led.w_loc_signed[-1] <= led.w_loc[-1] * 1.01


def test_report_zero_motion(robot, scene):
    state = mdl.initial_pose("flat_push")
    tl = gait.GaitTimeline(segments=[gait._kf(0.5, np.zeros(11))])
    traj = engine.rollout(robot, scene, state, tl, 0.5)
    rep = metrics.efficiency_report({"hold": traj})
    g = rep["gaits"]["hold"]
    assert g["w_box"] == pytest.approx(0.0, abs=1e-9)
    assert g["zero_w_box"]
    assert g["slope"] == float("inf")


def test_report_empty_set():
    with pytest.raises(ValueError):
        metrics.efficiency_report({})


def test_report_structure(croll_traj):
    rep = metrics.efficiency_report({"c_roll": croll_traj})
    assert rep["work_convention"] == "absolute"
    assert set(rep["ranking"]) == {"w_box", "w_loc", "peak_power", "box_distance", "slope"}
    assert rep["ranking"]["w_box"] == ["c_roll"]
    pd = rep["plot_data"]["c_roll"]
    assert len(pd["t"]) == len(pd["w_box"]) == len(pd["w_loc"]) == len(pd["power"])


def test_integration_convergence(robot, scene):
    # halving dt moves the work totals by < 1%
    state = mdl.initial_pose("flat_push")
    tl = gait.timeline_for_scenario("flat_push", "c_roll")
    totals = {}
    for dt in (1e-3, 5e-4):
        cfg = default_config()
        cfg["integrator"]["dt"] = dt
        traj = engine.rollout(robot, scene, state, tl, 2.0, cfg)
        totals[dt] = (traj.w_loc[-1], traj.w_box[-1])
    for a, b in zip(totals[1e-3], totals[5e-4]):
        assert abs(a - b) <= 0.01 * max(abs(b), 1e-9)
