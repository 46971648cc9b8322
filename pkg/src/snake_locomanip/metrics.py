"""Post-processing metrics: locomotion work, work done on the box,
instantaneous power and the per-gait efficiency report.

Locomotion work uses the absolute per-joint power convention (servos
dissipate when braking): P(t) = sum_k |tau_k * qd_k|, W_loc = int P dt.
The signed alternative int |sum_k tau_k qd_k| dt is computed alongside for
comparison; `work_convention` names the headline.
"""

from dataclasses import dataclass, field

import numpy as np

from .model import U_JOINTS

work_convention = "absolute"


def instantaneous_power(state, tau):
    """Actuator power magnitude sum_k |tau_k * joint_rate_k| (W)."""
    return float(np.sum(np.abs(np.asarray(tau) * state.u[U_JOINTS])))


def power_series(traj):
    """Instantaneous power at every sample of a trajectory."""
    return np.sum(np.abs(traj.tau * traj.u[:, U_JOINTS]), axis=1)


def work_on_box(traj):
    """Cumulative robot-on-box work series (J).

    The engine integrates robot->box contact power (plus latch-weld power
    while docked) at the integrator step; this returns that series.
    """
    if traj.w_box is None or len(traj.w_box) != len(traj):
        raise ValueError("trajectory carries no box-work log")
    return np.asarray(traj.w_box, dtype=float).copy()


def box_path_length(traj):
    """Arc length of the box COM path at each sample (m)."""
    steps = np.linalg.norm(np.diff(traj.q[:, 18:21], axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(steps)])


def box_displacement(traj):
    """Net box COM displacement vector over the trajectory (m)."""
    return traj.q[-1, 18:21] - traj.q[0, 18:21]


@dataclass
class EnergyLedger:
    """Per-sample energy bookkeeping of one rollout."""

    t: np.ndarray
    power: np.ndarray  # instantaneous |tau.qd| sum (W)
    w_loc: np.ndarray  # cumulative, absolute convention (J)
    w_loc_signed: np.ndarray  # cumulative int |sum tau.qd| dt (J)
    w_box: np.ndarray  # cumulative robot-on-box work (J)
    path_length: np.ndarray  # box COM arc length (m)

    @classmethod
    def from_trajectory(cls, traj):
        t = np.asarray(traj.t, dtype=float)
        power = power_series(traj)
        net = np.abs(np.sum(traj.tau * traj.u[:, U_JOINTS], axis=1))
        if len(t) > 1:
            signed = np.concatenate([[0.0], np.cumsum(0.5 * (net[1:] + net[:-1]) * np.diff(t))])
        else:
            signed = np.zeros_like(t)
        return cls(
            t=t,
            power=power,
            w_loc=np.asarray(traj.w_loc, dtype=float).copy(),
            w_loc_signed=signed,
            w_box=work_on_box(traj),
            path_length=box_path_length(traj),
        )

    @property
    def peak_power(self):
        return float(np.max(self.power)) if len(self.power) else 0.0


def gait_summary(traj):
    """Scalar figures of one gait rollout."""
    ledger = EnergyLedger.from_trajectory(traj)
    disp = box_displacement(traj)
    w_box = float(ledger.w_box[-1])
    slope = float(ledger.w_loc[-1] / w_box) if w_box > 0.0 else float("inf")
    return {
        "w_loc": float(ledger.w_loc[-1]),
        "w_box": w_box,
        "slope": slope,
        "zero_w_box": not (w_box > 0.0),
        "box_distance": float(np.linalg.norm(disp)),
        "box_path_length": float(ledger.path_length[-1]),
        "box_displacement": [float(v) for v in disp],
        "peak_power": ledger.peak_power,
        "duration": float(traj.t[-1] - traj.t[0]) if len(traj) else 0.0,
    }


def efficiency_report(trajectories):
    """Cross-gait comparison over a named set of flat-push rollouts.

    Returns per-gait totals, rankings (most-to-least) and the plot series
    (x = W_box(t), y = W_loc(t)) behind the work-efficiency figure.
    """
    if not trajectories:
        raise ValueError("efficiency_report needs at least one trajectory")
    gaits = {}
    plots = {}
    for name, traj in trajectories.items():
        gaits[name] = gait_summary(traj)
        ledger = EnergyLedger.from_trajectory(traj)
        plots[name] = {
            "t": ledger.t,
            "w_box": ledger.w_box,
            "w_loc": ledger.w_loc,
            "power": ledger.power,
        }

    def ranked(key, reverse=True):
        return sorted(gaits, key=lambda g: gaits[g][key], reverse=reverse)

    return {
        "work_convention": work_convention,
        "gaits": gaits,
        "ranking": {
            "w_box": ranked("w_box"),
            "w_loc": ranked("w_loc"),
            "peak_power": ranked("peak_power"),
            "box_distance": ranked("box_distance"),
            "slope": ranked("slope", reverse=False),  # smaller slope = more efficient
        },
        "plot_data": plots,
    }
