"""Shared rollout containers for the simulation engines."""

from dataclasses import dataclass, field

import numpy as np

STATUS_OK = 0
STATUS_NONFINITE = 1


@dataclass
class Trajectory:
    """Sampled rollout record plus running energy/effort integrals.

    Integrals are accumulated every dynamics step; the series hold their
    value at each recorded sample.
    """

    t: np.ndarray  # (n_s,)
    q: np.ndarray  # (n_s, 25)
    u: np.ndarray  # (n_s, 23)
    tau: np.ndarray  # (n_s, 11)
    latched: np.ndarray  # (n_s,) bool
    w_loc: np.ndarray  # (n_s,) cumulative sum |tau_k qd_k| dt
    w_box: np.ndarray  # (n_s,) cumulative robot->box power dt
    effort: np.ndarray  # (n_s,) cumulative contact objective dt
    status: int = STATUS_OK
    status_step: int = -1
    note: str = ""

    def __len__(self):
        return len(self.t)

    @property
    def final_state(self):
        from ..model import SystemState

        s = SystemState(q=self.q[-1].copy(), u=self.u[-1].copy(), t=float(self.t[-1]))
        s.latched = bool(self.latched[-1])
        return s


def allocate(n_samples):
    return Trajectory(
        t=np.zeros(n_samples),
        q=np.zeros((n_samples, 25)),
        u=np.zeros((n_samples, 23)),
        tau=np.zeros((n_samples, 11)),
        latched=np.zeros(n_samples, dtype=bool),
        w_loc=np.zeros(n_samples),
        w_box=np.zeros(n_samples),
        effort=np.zeros(n_samples),
    )
