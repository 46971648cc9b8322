"""Open-loop gait generation: per-joint sinusoidal CPG references, the named
gait presets and fixed poses, and latch-sequencing timelines for the
manipulation scenarios.

Joint references are sinusoids angle_k(t) = A_k sin(2 pi f t + phi_k) + c_k,
with yaw and pitch joints carrying separate amplitudes. Timelines stitch CPG
segments and keyframe moves (cubic ease-in/ease-out between poses) and tag
each segment with a latch command for the engine.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .model import N_JOINTS, ScenarioError

PRESET_NAMES = ("sidewinding", "c_roll", "s_roll", "j_roll")
POSE_NAMES = ("spiral_pose", "hex_pose")

LATCH_NONE = "none"
LATCH_ENGAGE = "engage"
LATCH_RELEASE = "release"
LATCH_SHAKE = "shake"
LATCH_COMMANDS = (LATCH_NONE, LATCH_ENGAGE, LATCH_RELEASE, LATCH_SHAKE)

_YAW = np.array([k % 2 == 0 for k in range(N_JOINTS)])


@dataclass(frozen=True)
class CpgParams:
    amplitude_yaw: float  # degrees
    amplitude_pitch: float  # degrees
    frequency: float  # Hz
    phase: tuple  # 11 radians
    mirror: bool = False
    offset: tuple = (0.0,) * N_JOINTS  # degrees

    def __post_init__(self):
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")
        if len(self.phase) != N_JOINTS or len(self.offset) != N_JOINTS:
            raise ValueError("phase and offset must have 11 entries")
        amp = np.where(_YAW, self.amplitude_yaw, self.amplitude_pitch)
        if np.any(np.abs(amp) + np.abs(self.offset) > 90.0 + 1e-9):
            raise ValueError("amplitude + |offset| exceeds the 90 deg joint limit")


@dataclass(frozen=True)
class GaitPreset:
    name: str
    params: CpgParams


def cpg_angles(params, t):
    """Joint reference angles (rad) of the sinusoidal pattern at time t."""
    amp = np.where(_YAW, params.amplitude_yaw, params.amplitude_pitch)
    raw = amp * np.sin(2.0 * np.pi * params.frequency * t + np.asarray(params.phase))
    raw = raw + np.asarray(params.offset)
    if params.mirror:
        raw = np.where(_YAW, -raw, raw)
    return np.deg2rad(raw)


def cpg_rates(params, t):
    """Analytic time derivative of cpg_angles (rad/s)."""
    amp = np.where(_YAW, params.amplitude_yaw, params.amplitude_pitch)
    wf = 2.0 * np.pi * params.frequency
    raw = amp * wf * np.cos(wf * t + np.asarray(params.phase))
    if params.mirror:
        raw = np.where(_YAW, -raw, raw)
    return np.deg2rad(raw)


_QUARTER = np.pi / 2.0

# J-shape: lateral-rolling wave with a standing hook on the head-side third.
_J_OFFSET = (35.0, 0.0, 35.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

_PRESETS = {
    "sidewinding": CpgParams(
        amplitude_yaw=60.0,
        amplitude_pitch=14.0,
        frequency=0.5,
        phase=tuple(_QUARTER * np.array([0, 0, 1, 1, 2, 2, 3, 3, 0, 0, 1], dtype=float)),
    ),
    "c_roll": CpgParams(
        amplitude_yaw=20.0,
        amplitude_pitch=20.0,
        frequency=0.5,
        phase=tuple(_QUARTER * np.array([0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0], dtype=float)),
    ),
}
# S-shape: the tail third of the body rolls in counter-phase, bending the
# C curve into an S.
_PRESETS["s_roll"] = replace(
    _PRESETS["c_roll"],
    phase=tuple(p + (np.pi if k >= 8 else 0.0) for k, p in enumerate(_PRESETS["c_roll"].phase)),
)
_PRESETS["j_roll"] = replace(_PRESETS["c_roll"], offset=_J_OFFSET)


def preset(name, mirror=False, frequency=None):
    if name not in _PRESETS:
        raise ValueError(f"unknown gait preset {name!r}")
    params = _PRESETS[name]
    if mirror:
        params = replace(params, mirror=True)
    if frequency is not None:
        params = replace(params, frequency=frequency)
    return GaitPreset(name=name, params=params)


def fixed_pose(name):
    """Closed-curve joint angle sets (rad): hexagon and inward spiral."""
    pose = np.zeros(N_JOINTS)
    if name == "hex_pose":
        # six sides of two modules each; 60 deg exterior turn at every yaw joint
        pose[_YAW] = np.deg2rad(60.0)
    elif name == "spiral_pose":
        # constant curvature slightly past closure so the head tucks inside
        pose[_YAW] = np.deg2rad(66.0)
    else:
        raise ValueError(f"unknown fixed pose {name!r}")
    return pose


@dataclass(frozen=True)
class Segment:
    duration: float
    preset: GaitPreset | None = None  # CPG segment when set
    target: tuple | None = None  # keyframe segment: 11 target angles (rad)
    latch: str = LATCH_NONE

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("segment duration must be positive")
        if (self.preset is None) == (self.target is None):
            raise ValueError("segment needs exactly one of preset / target")
        if self.latch not in LATCH_COMMANDS:
            raise ValueError(f"unknown latch command {self.latch!r}")


@dataclass
class GaitTimeline:
    segments: list
    initial: tuple = (0.0,) * N_JOINTS  # pose entering the first segment

    @property
    def duration(self):
        return sum(s.duration for s in self.segments)

    def segment_start_poses(self):
        """Pose at the start of each segment (keyframes chain end-to-end)."""
        starts = []
        pose = np.asarray(self.initial, dtype=float)
        for seg in self.segments:
            starts.append(pose)
            if seg.target is not None:
                pose = np.asarray(seg.target, dtype=float)
            else:
                pose = cpg_angles(seg.preset.params, seg.duration)
        return starts


def _ease(x):
    return 3.0 * x * x - 2.0 * x * x * x


def _ease_rate(x):
    return 6.0 * x - 6.0 * x * x


def sample(timeline, t):
    """(q_ref, latch command) at time t; t past the end holds the final pose."""
    q_ref, _, latch = sample_with_rate(timeline, t)
    return q_ref, latch


def sample_with_rate(timeline, t):
    """(q_ref, qd_ref, latch command) at time t."""
    starts = timeline.segment_start_poses()
    t_loc = max(float(t), 0.0)
    for seg, start in zip(timeline.segments, starts):
        if t_loc <= seg.duration or seg is timeline.segments[-1]:
            if seg.preset is not None:
                tl = min(t_loc, seg.duration)
                return cpg_angles(seg.preset.params, tl), cpg_rates(seg.preset.params, tl), seg.latch
            x = np.clip(t_loc / seg.duration, 0.0, 1.0)
            target = np.asarray(seg.target, dtype=float)
            q = start + _ease(x) * (target - start)
            qd = _ease_rate(x) / seg.duration * (target - start)
            return q, qd, seg.latch
        t_loc -= seg.duration
    raise ValueError("empty timeline")


def _kf(duration, target, latch=LATCH_NONE):
    return Segment(duration=duration, target=tuple(np.asarray(target, dtype=float)), latch=latch)


def _arm_pose(j3=0.0, p1=0.0, p3=0.0):
    """Lift-arm pose: flat C-curled tail (in-plane yaws) widens the support
    polygon so the reared front third can carry the box without rolling;
    j3 yaws the airborne arc sideways over the platform."""
    v = np.zeros(N_JOINTS)
    v[1], v[2], v[3] = p1, j3, p3
    v[6] = v[8] = v[10] = 60.0
    return np.deg2rad(v)


def _lift_place_segments():
    """Curl the tail for support, rear the front up to lift the docked box,
    yaw the arc over the platform, set the box down, release and shake free,
    then retreat up and away before unbending."""
    # joints: [y p y p y p y p y p y]; arc pitches are 1, 3; arc yaw is 2
    curl = _arm_pose()
    rear = _arm_pose(0, -60, -50)
    slew = _arm_pose(-80, -60, -50)
    low = _arm_pose(-80, -50, -42)
    lift = _arm_pose(-80, -65, -55)
    back = _arm_pose(0, -65, -55)
    return [
        _kf(2.0, curl),
        _kf(2.5, rear),
        _kf(3.0, slew),
        _kf(2.0, slew),
        _kf(2.0, low),
        _kf(0.5, low, latch=LATCH_RELEASE),
        _kf(1.0, low, latch=LATCH_SHAKE),
        _kf(1.5, lift),
        _kf(2.0, back),
        _kf(2.0, np.zeros(N_JOINTS)),
    ]


def _pick_place_segments():
    """Reverse maneuver: rear up, yaw the arc over the platform box, press
    the head tip onto its socket face, dock, lift it clear and bring it down
    on the ground in front of the robot."""
    curl = _arm_pose()
    rear = _arm_pose(0, -60, -50)
    over = _arm_pose(-80, -60, -50)
    reach = _arm_pose(-80, -50, -42)
    rise = _arm_pose(-80, -65, -55)
    front = _arm_pose(0, -65, -55)
    down = _arm_pose(0, -15, -12)
    return [
        _kf(2.0, curl),
        _kf(2.5, rear),
        _kf(3.0, over),
        _kf(2.0, reach),
        _kf(0.5, reach, latch=LATCH_ENGAGE),
        _kf(2.0, rise),
        _kf(3.0, front),
        _kf(3.0, down),
        _kf(0.5, down, latch=LATCH_RELEASE),
        _kf(2.0, np.zeros(N_JOINTS)),
    ]


def timeline_for_scenario(name, gait_name="sidewinding", duration=10.0, mirror=False, frequency=None):
    """Reference timeline reproducing each scenario's maneuver."""
    if name == "flat_push":
        seg = Segment(duration=duration, preset=preset(gait_name, mirror, frequency))
        return GaitTimeline(segments=[seg], initial=tuple(cpg_angles(seg.preset.params, 0.0)))
    if name == "lift_place":
        return GaitTimeline(segments=_lift_place_segments())
    if name == "pick_place":
        return GaitTimeline(segments=_pick_place_segments())
    if name == "ramp_ascent":
        push = Segment(duration=duration, preset=preset("s_roll", mirror, frequency))
        start = cpg_angles(push.preset.params, 0.0)
        return GaitTimeline(segments=[_kf(1.0, start), push])
    raise ScenarioError(f"unknown scenario {name!r}")
