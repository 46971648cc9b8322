"""Robot, scene and state descriptions.

The robot is a 12-link chain (head, L1..L10, tail) joined by 11 revolute
joints J1..J11 with alternating yaw/pitch axes. Generalized coordinates
cover the floating head (base), the 11 joints and a free box:

  q (25): [base pos 3, base quat wxyz 4, joint angles 11, box pos 3, box quat 4]
  u (23): [base lin vel 3, base ang vel 3, joint rates 11, box lin vel 3, box ang vel 3]

Angular velocities are world-frame. In a straight pose the chain runs along
+x with the head tip at the base-frame -x end; yaw joints rotate about local
z, pitch joints about local y.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import config as config_mod
from .rotations import IDENTITY_QUAT, quat_from_axis_angle, quat_mul, quat_rotate

N_LINKS = 12
N_JOINTS = 11
NQ = 25
NU = 23

# q layout
Q_BASE_POS = slice(0, 3)
Q_BASE_QUAT = slice(3, 7)
Q_JOINTS = slice(7, 18)
Q_BOX_POS = slice(18, 21)
Q_BOX_QUAT = slice(21, 25)

# u layout
U_BASE_LIN = slice(0, 3)
U_BASE_ANG = slice(3, 6)
U_JOINTS = slice(6, 17)
U_BOX_LIN = slice(17, 20)
U_BOX_ANG = slice(20, 23)

NU_ROBOT = 17

SCENARIOS = ("flat_push", "lift_place", "pick_place", "ramp_ascent")

JOINT_TORQUE_LIMIT = 6.9  # N*m
JOINT_POSITION_LIMIT = np.pi / 2

BODY_INERTIA = (7.167e-4, 8.704e-4, 8.626e-4)
HEAD_INERTIA = (4.4562e-4, 1.710e-3, 1.793e-3)
TAIL_INERTIA = (8.182e-4, 1.141e-3, 1.109e-3)


class ScenarioError(ValueError):
    """Unknown scenario name."""


@dataclass(frozen=True)
class LinkSpec:
    mass: float
    inertia_diag: tuple  # (Ixx, Iyy, Izz) about principal axes at COM
    radius: float  # capsule radius
    half_length: float  # capsule segment half-length
    com_offset: tuple = (0.0, 0.0, 0.0)  # in link frame


@dataclass(frozen=True)
class JointSpec:
    axis: tuple  # unit axis in parent frame; z = yaw, y = pitch
    position_limit: float = JOINT_POSITION_LIMIT
    internal_stiffness: float = 0.0  # folded into the servo PD gains
    internal_damping: float = 0.0
    torque_limit: float = JOINT_TORQUE_LIMIT


@dataclass(frozen=True)
class RobotModel:
    links: tuple  # 12 LinkSpec
    joints: tuple  # 11 JointSpec
    total_length: float = 1.6
    module_diameter: float = 0.10

    @property
    def module_length(self):
        return self.total_length / N_LINKS

    @property
    def total_mass(self):
        return sum(l.mass for l in self.links)

    def joint_is_yaw(self, k):
        return abs(self.joints[k].axis[2]) > 0.5


@dataclass(frozen=True)
class StaticCuboid:
    """Fixed terrain cuboid (platform, or tilted slab for the ramp)."""

    center: tuple
    half_extents: tuple
    rotation: tuple = field(default=tuple(np.eye(3).ravel()))

    def rot_matrix(self):
        return np.array(self.rotation).reshape(3, 3)


@dataclass(frozen=True)
class SceneSpec:
    gravity: float = 9.8  # magnitude, acts along -z
    box_mass: float = 0.5
    box_size: tuple = (0.2, 0.2, 0.2)  # full edge lengths
    platform: StaticCuboid | None = None
    ramp: StaticCuboid | None = None
    ramp_angle_deg: float = 16.7
    # socket frame on the box: origin on a face, x pointing outward
    socket_offset: tuple = (-0.1, 0.0, 0.0)

    def box_inertia_diag(self):
        sx, sy, sz = self.box_size
        m = self.box_mass
        return np.array(
            [
                m / 12.0 * (sy * sy + sz * sz),
                m / 12.0 * (sx * sx + sz * sz),
                m / 12.0 * (sx * sx + sy * sy),
            ]
        )

    def box_half_extents(self):
        return 0.5 * np.asarray(self.box_size)


@dataclass
class SystemState:
    q: np.ndarray  # (25,)
    u: np.ndarray  # (23,)
    t: float = 0.0
    latched: bool = False
    # box pose in the head frame, captured when the latch engages
    dock_pos: np.ndarray = field(default_factory=lambda: np.zeros(3))
    dock_quat: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())

    def copy(self):
        return SystemState(
            q=self.q.copy(),
            u=self.u.copy(),
            t=self.t,
            latched=self.latched,
            dock_pos=self.dock_pos.copy(),
            dock_quat=self.dock_quat.copy(),
        )


@dataclass
class ValidationReport:
    failures: list = field(default_factory=list)

    def add(self, path, message):
        self.failures.append((path, message))

    @property
    def ok(self):
        return not self.failures


def build_default_robot(cfg=None):
    """Assemble the 12-link chain with the published mass/inertia constants."""
    cfg = cfg if cfg is not None else config_mod.default_config()
    link_mass = cfg["robot"]["link_mass"]
    total_length = 1.6
    module_length = total_length / N_LINKS
    radius = 0.05
    half_length = module_length / 2.0 - radius

    def link(inertia):
        return LinkSpec(
            mass=link_mass,
            inertia_diag=tuple(inertia),
            radius=radius,
            half_length=half_length,
        )

    links = [link(HEAD_INERTIA)]
    links += [link(BODY_INERTIA) for _ in range(10)]
    links.append(link(TAIL_INERTIA))

    yaw_first = cfg["robot"]["yaw_first"]
    joints = []
    for k in range(N_JOINTS):
        is_yaw = (k % 2 == 0) == yaw_first
        axis = (0.0, 0.0, 1.0) if is_yaw else (0.0, 1.0, 0.0)
        joints.append(JointSpec(axis=axis))

    return RobotModel(
        links=tuple(links),
        joints=tuple(joints),
        total_length=total_length,
        module_diameter=2 * radius,
    )


def _ramp_slab(cfg, yaw=0.0):
    """Tilted slab whose top face is the incline, rising along the yawed +y
    from the toe at the local origin; callers shift it into scene position."""
    angle = np.deg2rad(cfg["ramp"]["angle_deg"])
    elev = cfg["ramp"]["max_elevation"]
    width = cfg["ramp"]["width"]
    slope_len = elev / np.sin(angle)
    thickness = 0.3
    c, s = np.cos(angle), np.sin(angle)
    # tilt about x (local y -> up the slope), then yaw into the push heading
    Rx = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    cz, sz = np.cos(yaw), np.sin(yaw)
    Rz = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    R = Rz @ Rx
    center = R @ np.array([0.0, slope_len / 2.0, -thickness / 2.0])
    return R, center, (width / 2.0, slope_len / 2.0, thickness / 2.0)


def build_scene(cfg=None, scenario="flat_push"):
    cfg = cfg if cfg is not None else config_mod.default_config()
    if scenario not in SCENARIOS:
        raise ScenarioError(f"unknown scenario {scenario!r}")
    box_size = tuple(cfg["box"]["size"])
    platform = None
    ramp = None
    if scenario in ("lift_place", "pick_place", "ramp_ascent"):
        h = cfg["platform"]["height"]
        sx, sy = cfg["platform"]["size_xy"]
        # beside the robot chain, reachable by the reared-up front section
        platform = StaticCuboid(
            center=(0.45, -(0.15 + sy / 2.0), h / 2.0),
            half_extents=(sx / 2.0, sy / 2.0, h / 2.0),
        )
    if scenario == "ramp_ascent":
        # upslope faces the rolling-gait push heading; toe crosses the box path
        R, center, half = _ramp_slab(cfg, yaw=np.deg2rad(60.0))
        toe = np.array([0.45, 0.80, 0.0])
        ramp = StaticCuboid(
            center=tuple(center + toe),
            half_extents=half,
            rotation=tuple(R.ravel()),
        )
        platform = None
    return SceneSpec(
        gravity=cfg["gravity"],
        box_mass=cfg["box"]["mass"],
        box_size=box_size,
        platform=platform,
        ramp=ramp,
        ramp_angle_deg=cfg["ramp"]["angle_deg"],
        socket_offset=(-box_size[0] / 2.0, 0.0, 0.0),
    )


def settle_penetration(force, contact_cfg):
    """Penetration depth at which the smoothed spring carries `force` (statics)."""
    k = contact_cfg["k"]
    w = contact_cfg["w"]
    lo, hi = 0.0, 10.0 * w
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        x = min(mid / w, 1.0)
        s = 3 * x * x - 2 * x * x * x
        if s * k * mid < force:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def straight_chain_q(model, base_pos, base_quat):
    q = np.zeros(NQ)
    q[Q_BASE_POS] = base_pos
    q[Q_BASE_QUAT] = base_quat
    q[Q_BOX_QUAT] = IDENTITY_QUAT
    return q


def head_tip_frame(q):
    """World pose of the docking frame on the head tip (x pointing outward)."""
    from .rotations import quat_to_matrix

    p = q[Q_BASE_POS]
    R = quat_to_matrix(q[Q_BASE_QUAT])
    total_length = 1.6
    half_module = total_length / N_LINKS / 2.0
    tip = p + R @ np.array([-half_module, 0.0, 0.0])
    # outward direction is -x of the head frame
    R_tip = R @ np.diag([-1.0, -1.0, 1.0])  # flip x (and y to stay right-handed)
    return tip, R_tip


def docked_box_pose(model, scene, base_pos, base_quat, clearance=0.002):
    """Box pose with its socket face seated against the head tip."""
    L = model.module_length
    r = model.links[0].radius
    half = scene.box_half_extents()
    # box center sits ahead of the head tip along the head's -x, socket face
    # toward the robot; lift the center so box and head both rest on ground
    local = np.array([-(L / 2.0 + half[0] + clearance), 0.0, half[2] - r])
    pos = np.asarray(base_pos) + quat_rotate(base_quat, local)
    return pos, np.asarray(base_quat).copy()


def initial_pose(scenario, model=None, scene=None, cfg=None, push_sign=1.0):
    """Rest state for a named scenario: straight chain on the ground, box
    placed per scenario, zero velocities."""
    cfg = cfg if cfg is not None else config_mod.default_config()
    model = model if model is not None else build_default_robot(cfg)
    scene = scene if scene is not None else build_scene(cfg, scenario)
    if scenario not in SCENARIOS:
        raise ScenarioError(f"unknown scenario {scenario!r}")

    r = model.links[0].radius
    d0 = settle_penetration(model.links[0].mass * scene.gravity / 2.0, cfg["contact"])
    base_pos = np.array([model.module_length / 2.0, 0.0, r - d0])
    base_quat = IDENTITY_QUAT.copy()
    q = straight_chain_q(model, base_pos, base_quat)
    state = SystemState(q=q, u=np.zeros(NU))

    half = scene.box_half_extents()
    dbox = settle_penetration(scene.box_mass * scene.gravity / 4.0, cfg["contact"])

    if scenario == "flat_push":
        # box a fixed clearance ahead of mid-body in the rolling direction
        q[Q_BOX_POS] = (model.total_length / 2.0, push_sign * 0.3, half[2] - dbox)
    elif scenario == "lift_place":
        pos, quat = docked_box_pose(model, scene, base_pos, base_quat)
        q[Q_BOX_POS] = pos
        q[Q_BOX_QUAT] = quat
        state.latched = True
        _store_dock_transform(state)
    elif scenario == "pick_place":
        assert scene.platform is not None
        top = scene.platform.center[2] + scene.platform.half_extents[2]
        edge_y = scene.platform.center[1] + scene.platform.half_extents[1]
        q[Q_BOX_POS] = (scene.platform.center[0], edge_y - half[1] - 0.02, top + half[2] - dbox)
        # socket on the face toward the robot body (box yawed -90 deg)
        s = np.sqrt(0.5)
        q[Q_BOX_QUAT] = (s, 0.0, 0.0, -s)
    elif scenario == "ramp_ascent":
        # box on flat ground between the robot and the ramp toe
        q[Q_BOX_POS] = (0.8, 0.35, half[2] - dbox)
    return state


def _store_dock_transform(state):
    """Capture the current head->box relative pose as the latch transform."""
    from .rotations import quat_conj, quat_to_matrix

    bq = state.q[Q_BASE_QUAT]
    R = quat_to_matrix(bq)
    rel = state.q[Q_BOX_POS] - state.q[Q_BASE_POS]
    state.dock_pos = R.T @ rel
    state.dock_quat = quat_mul(quat_conj(bq), state.q[Q_BOX_QUAT])


def validate(model, scene, cfg=None):
    """Report every violated model/scene invariant with its field path."""
    cfg = cfg if cfg is not None else config_mod.default_config()
    report = ValidationReport()
    if len(model.links) != N_LINKS:
        report.add("links", f"expected {N_LINKS} links, got {len(model.links)}")
    if len(model.joints) != N_JOINTS:
        report.add("joints", f"expected {N_JOINTS} joints, got {len(model.joints)}")
    for i, link in enumerate(model.links):
        if link.mass <= 0:
            report.add(f"links[{i}].mass", "must be positive")
        if any(c <= 0 for c in link.inertia_diag):
            report.add(f"links[{i}].inertia_diag", "all components must be positive")
        if link.radius <= 0 or link.half_length < 0:
            report.add(f"links[{i}].shape", "bad capsule dimensions")
    for k, joint in enumerate(model.joints):
        if joint.position_limit <= 0:
            report.add(f"joints[{k}].position_limit", "must be positive")
        if joint.torque_limit <= 0:
            report.add(f"joints[{k}].torque_limit", "must be positive")
        a = np.asarray(joint.axis)
        if abs(np.linalg.norm(a) - 1.0) > 1e-9:
            report.add(f"joints[{k}].axis", "must be a unit vector")
    if scene.gravity <= 0:
        report.add("scene.gravity", "magnitude must be positive")
    if scene.box_mass <= 0:
        report.add("scene.box.mass", "must be positive")
    if any(s <= 0 for s in scene.box_size):
        report.add("scene.box.size", "edges must be positive")
    mu_s = cfg["contact"]["mu_s"]
    if np.tan(np.deg2rad(scene.ramp_angle_deg)) >= mu_s:
        report.add(
            "scene.ramp.angle_deg",
            f"tan({scene.ramp_angle_deg} deg) >= mu_s={mu_s}: box cannot rest on the ramp",
        )
    return report
