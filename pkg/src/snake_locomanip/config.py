"""Run configuration: embedded defaults plus JSON overrides.

All tunable constants of the toolkit live here under the same keys the
scenario config files use (``contact.k``, ``integrator.dt``, ...). Loading a
config deep-merges user overrides onto the defaults, so a config file only
needs the keys it changes.
"""

import copy
import json

DEFAULTS = {
    "gravity": 9.8,
    "robot": {
        "link_mass": 0.5,
        # J1 is a yaw joint; set False to flip the yaw/pitch parity
        "yaw_first": True,
    },
    "box": {
        "mass": 0.5,
        "size": [0.2, 0.2, 0.2],
    },
    "platform": {
        "height": 0.3,
        "size_xy": [0.8, 1.0],
    },
    "ramp": {
        "angle_deg": 16.7,
        "max_elevation": 0.6,
        "width": 1.6,
    },
    "contact": {
        "k": 1.0e4,
        "b": 1.0e3,
        "w": 1.0e-3,
        "mu_s": 0.7,
        "mu_d": 0.5,
        "v_crit": 1.0e-3,
        # fraction of v_crit over which friction ramps from 0 to mu_s
        "v_stick_frac": 0.1,
        "self": False,
    },
    "integrator": {
        "dt": 1.0e-4,
        "scheme": "semi_implicit_euler",
        "renorm_every": 1,
    },
    "joints": {
        "kp": 50.0,
        "kd": 1.0,
        # mechanical hard-stop penalty beyond the +/-90 deg travel
        "limit_stiffness": 50.0,
        "limit_damping": 0.5,
    },
    "gait": {
        "name": "sidewinding",
        "frequency": 0.5,
        "mirror": False,
    },
    "planner": {
        "budget": 200,
        "weights": [10.0, 1.0e-3, 1.0e-4],
        "force_mode": "penalty",
        "seed_gait": "c_roll",
        "seed": 0,
    },
    "output": {
        "sample_hz": 100,
        "full_rate": False,
    },
}


class ConfigError(ValueError):
    """Raised for malformed or inconsistent run configurations."""


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key in out and isinstance(out[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{here}: expected a mapping")
            out[key] = _merge(out[key], value, here)
        else:
            out[key] = copy.deepcopy(value)
    return out


def default_config():
    return copy.deepcopy(DEFAULTS)


def load_config(path=None, overrides=None):
    """Resolve a full config from an optional JSON file plus overrides."""
    cfg = default_config()
    if path is not None:
        with open(path) as fh:
            try:
                user = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be an object")
        cfg = _merge(cfg, user)
    if overrides:
        cfg = _merge(cfg, overrides)
    _check(cfg)
    return cfg


def _check(cfg):
    if cfg["integrator"]["dt"] <= 0 or cfg["integrator"]["dt"] > 1.0e-3:
        raise ConfigError("integrator.dt must be in (0, 1e-3]")
    if cfg["integrator"]["scheme"] not in ("semi_implicit_euler", "rk4"):
        raise ConfigError(f"unknown integrator.scheme {cfg['integrator']['scheme']!r}")
    c = cfg["contact"]
    if c["k"] <= 0 or c["b"] < 0 or c["w"] <= 0:
        raise ConfigError("contact stiffness/damping/width out of range")
    if not (c["mu_s"] >= c["mu_d"] > 0):
        raise ConfigError("require mu_s >= mu_d > 0")
    if c["v_crit"] <= 0:
        raise ConfigError("contact.v_crit must be positive")
    if cfg["output"]["sample_hz"] <= 0:
        raise ConfigError("output.sample_hz must be positive")
