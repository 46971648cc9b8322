"""Rollout engine: reference precomputation, backend selection and the
public `rollout` entry point.

Two interchangeable kernels integrate the fixed-step loop: a compiled
Cython kernel (`_core`) and a pure-python fallback. Selection happens at
import via SNAKE_LOCOMANIP_BACKEND = auto | compiled | python (default
auto: compiled when available).
"""

import os

import numpy as np

from .. import config as config_mod
from .. import contact as ct
from .. import dynamics as dyn
from .. import gait as gait_mod
from . import fallback
from . import types as T

_choice = os.environ.get("SNAKE_LOCOMANIP_BACKEND", "auto")
_core = None
if _choice in ("auto", "compiled"):
    try:
        import importlib

        _core = importlib.import_module("._core", __name__)  # compiled extension, optional
    except ImportError:
        _core = None
        if _choice == "compiled":
            raise
BACKEND = "compiled" if _core is not None else "python"


def build_references(timeline, n_steps, dt):
    """Per-step joint references, reference rates and latch command codes."""
    q_ref = np.zeros((n_steps, 11))
    qd_ref = np.zeros((n_steps, 11))
    latch = np.zeros(n_steps, dtype=np.int32)
    for i in range(n_steps):
        q, qd, cmd = gait_mod.sample_with_rate(timeline, i * dt)
        q_ref[i] = q
        qd_ref[i] = qd
        latch[i] = fallback.LATCH_CODES[cmd]
    return q_ref, qd_ref, latch


def rollout(model, scene, state0, timeline, duration, cfg=None, backend=None):
    """Simulate `duration` seconds of the timeline from state0.

    Returns a Trajectory sampled at output.sample_hz (every state when
    output.full_rate is set).
    """
    cfg = cfg if cfg is not None else config_mod.default_config()
    icfg = dyn.IntegratorConfig(dt=cfg["integrator"]["dt"], scheme=cfg["integrator"]["scheme"])
    dt = icfg.dt
    n = int(round(duration / dt))
    if cfg["output"]["full_rate"]:
        stride = 1
    else:
        stride = max(1, int(round(1.0 / (cfg["output"]["sample_hz"] * dt))))
    q_ref, qd_ref, latch = build_references(timeline, n, dt)
    params = ct.ContactParams.from_config(cfg)
    gains = dyn.JointGains(
        kp=cfg["joints"]["kp"],
        kd=cfg["joints"]["kd"],
        limit_stiffness=cfg["joints"]["limit_stiffness"],
        limit_damping=cfg["joints"]["limit_damping"],
    )
    use = backend if backend is not None else BACKEND
    if use == "compiled" and _core is not None:
        from . import pack

        try:
            return pack.run_compiled(_core, model, scene, state0, q_ref, qd_ref, latch,
                                     dt, stride, params, gains)
        except pack.UnsupportedModel:
            if backend == "compiled":
                raise
    return fallback.run(model, scene, state0, q_ref, qd_ref, latch, dt, stride,
                        params, gains)
