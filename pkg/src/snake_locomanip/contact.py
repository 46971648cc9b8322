"""Contact detection and the smooth penalty force laws.

Bodies are numbered 0..11 (robot links), 12 (box); terrain uses negative
ids. Every contact point carries a right-handed frame (n, t1, t2) with n
pushing body B away from body A, the penetration depth/rate, and the 3 x 23
constraint Jacobian W = [n; t1; t2] (J_B - J_A) so that the stacked gap rate
is W u.
"""

from dataclasses import dataclass, field

import numpy as np

from .kinematics import BOX_BODY, capsule_segment, compute_kinematics, point_jacobian_linear, point_velocity
from .model import N_LINKS, NU, NU_ROBOT

GROUND = -1
PLATFORM = -2
RAMP = -3

_TERRAIN = (GROUND, PLATFORM, RAMP)


@dataclass(frozen=True)
class NormalForceParams:
    k: float = 1.0e4  # N/m
    b: float = 1.0e3  # N*s/m
    w: float = 1.0e-3  # transition width, m


@dataclass(frozen=True)
class FrictionParams:
    mu_s: float = 0.7
    mu_d: float = 0.5
    v_crit: float = 1.0e-3  # m/s
    v_stick: float = 1.0e-4  # ramp-up width of the sticking branch


@dataclass(frozen=True)
class ContactParams:
    normal: NormalForceParams = NormalForceParams()
    friction: FrictionParams = FrictionParams()
    self_contact: bool = False

    @classmethod
    def from_config(cls, cfg):
        c = cfg["contact"]
        return cls(
            normal=NormalForceParams(k=c["k"], b=c["b"], w=c["w"]),
            friction=FrictionParams(
                mu_s=c["mu_s"],
                mu_d=c["mu_d"],
                v_crit=c["v_crit"],
                v_stick=c["v_stick_frac"] * c["v_crit"],
            ),
            self_contact=c["self"],
        )


@dataclass
class ContactPoint:
    body_a: int
    body_b: int
    feature: int  # capsule end / cuboid corner index, for deterministic ordering
    p: np.ndarray  # world contact point
    n: np.ndarray  # unit normal, outward from A
    t1: np.ndarray
    t2: np.ndarray
    d: float  # penetration depth (>0 touching)
    d_dot: float  # penetration rate
    v_t: np.ndarray  # tangential relative velocity (2,)
    W: np.ndarray  # (3, 23)
    f_N: float = 0.0
    f_T: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @property
    def separation(self):
        return -self.d

    def force_local(self):
        return np.array([self.f_N, self.f_T[0], self.f_T[1]])

    def force_world(self):
        """Force applied to body B at p (body A receives the negative)."""
        return self.f_N * self.n + self.f_T[0] * self.t1 + self.f_T[1] * self.t2


@dataclass
class ContactSet:
    points: list = field(default_factory=list)

    def __len__(self):
        return len(self.points)

    def stacked_gaps(self):
        return np.array([pt.separation for pt in self.points])

    def stacked_jacobian(self):
        if not self.points:
            return np.zeros((0, NU))
        return np.vstack([pt.W for pt in self.points])

    def stacked_forces(self):
        if not self.points:
            return np.zeros(0)
        return np.concatenate([pt.force_local() for pt in self.points])


@dataclass
class DelassusSystem:
    G: np.ndarray  # (3m, 3m) apparent inverse inertia at the contacts
    c: np.ndarray  # (3m,) force-independent contact-frame acceleration


def smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return 3.0 * x * x - 2.0 * x * x * x


def normal_force(d, d_dot, params=None):
    """Smoothed spring-damper normal force, floored at zero (no adhesion)."""
    params = params if params is not None else NormalForceParams()
    s = smoothstep(d / params.w)
    return max(0.0, s * (params.k * d + params.b * d_dot))


def effective_friction_coefficient(v, params=None):
    """Stick-slip effective mu: 0 at rest, mu_s at the critical velocity
    (its global maximum), decaying to mu_d at high sliding speed."""
    params = params if params is not None else FrictionParams()
    if v < 0:
        raise ValueError("sliding speed must be non-negative")
    if v <= params.v_stick:
        return params.mu_s * smoothstep(v / params.v_stick)
    if v <= params.v_crit:
        return params.mu_s
    return params.mu_d + (params.mu_s - params.mu_d) * np.exp(1.0 - v / params.v_crit)


def friction_force(f_N, v_t, params=None):
    """Tangential force opposing v_t with |f_T| = mu(|v_t|) f_N."""
    params = params if params is not None else FrictionParams()
    v_t = np.asarray(v_t, dtype=float)
    speed = float(np.hypot(v_t[0], v_t[1]))
    if speed <= 0.0 or f_N <= 0.0:
        return np.zeros(2)
    mu = effective_friction_coefficient(speed, params)
    return -mu * f_N * v_t / speed


def _tangent_basis(n):
    if abs(n[2]) < 0.9:
        t1 = np.cross(n, np.array([0.0, 0.0, 1.0]))
    else:
        t1 = np.cross(n, np.array([1.0, 0.0, 0.0]))
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(n, t1)


def _point_vs_cuboid(x, center, R, half):
    """Signed distance of a point to a solid cuboid (negative inside), the
    closest surface point, and the outward normal there."""
    local = R.T @ (x - np.asarray(center))
    half = np.asarray(half)
    clamped = np.clip(local, -half, half)
    if np.any(np.abs(local) > half):
        delta = local - clamped
        dist = float(np.linalg.norm(delta))
        n_local = delta / dist
        return dist, np.asarray(center) + R @ clamped, R @ n_local
    margins = half - np.abs(local)
    axis = int(np.argmin(margins))
    sd = -float(margins[axis])
    n_local = np.zeros(3)
    n_local[axis] = 1.0 if local[axis] >= 0 else -1.0
    surf = local.copy()
    surf[axis] = half[axis] * n_local[axis]
    return sd, np.asarray(center) + R @ surf, R @ n_local


def _segment_closest(p1, q1, p2, q2):
    """Closest points between segments [p1,q1] and [p2,q2]."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = d1 @ d1
    e = d2 @ d2
    f = d2 @ r
    c = d1 @ r
    b = d1 @ d2
    denom = a * e - b * b
    s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > 1e-14 else 0.0
    t = (b * s + f) / e if e > 1e-14 else 0.0
    if t < 0.0:
        t = 0.0
        s = np.clip(-c / a, 0.0, 1.0) if a > 1e-14 else 0.0
    elif t > 1.0:
        t = 1.0
        s = np.clip((b - c) / a, 0.0, 1.0) if a > 1e-14 else 0.0
    return p1 + s * d1, p2 + t * d2


def _box_corners(kin, half):
    corners = np.empty((8, 3))
    idx = 0
    for sx in (-1.0, 1.0):
        for sy in (-1.0, 1.0):
            for sz in (-1.0, 1.0):
                corners[idx] = kin.box_pos + kin.box_R @ (half * np.array([sx, sy, sz]))
                idx += 1
    return corners


def _make_point(kin, body_a, body_b, feature, p, n, d):
    t1, t2 = _tangent_basis(n)
    v_b = point_velocity(kin, body_b, p) if body_b >= 0 else np.zeros(3)
    v_a = point_velocity(kin, body_a, p) if body_a >= 0 else np.zeros(3)
    v_rel = v_b - v_a
    J = point_jacobian_linear(kin, body_b, p) if body_b >= 0 else np.zeros((3, NU))
    if body_a >= 0:
        J = J - point_jacobian_linear(kin, body_a, p)
    W = np.vstack([n, t1, t2]) @ J
    return ContactPoint(
        body_a=body_a,
        body_b=body_b,
        feature=feature,
        p=np.asarray(p, dtype=float),
        n=n,
        t1=t1,
        t2=t2,
        d=float(d),
        d_dot=float(-n @ v_rel),
        v_t=np.array([t1 @ v_rel, t2 @ v_rel]),
        W=W,
    )


def detect_contacts(model, scene, state, params=None, kin=None):
    """All contact candidates with penetration d > -w, forces unset.

    Ordering is deterministic: link-ground, box-ground, link-box, link-static,
    box-static, then (optionally) link-link, each sorted by body/feature id.
    """
    params = params if params is not None else ContactParams()
    kin = kin if kin is not None else compute_kinematics(model, state)
    w = params.normal.w
    pts = []
    up = np.array([0.0, 0.0, 1.0])
    half_box = scene.box_half_extents()

    # robot links vs ground
    for i in range(N_LINKS):
        r = model.links[i].radius
        for j, e in enumerate(capsule_segment(model, kin, i)):
            d = r - e[2]
            if d > -w:
                p = e - r * up
                pts.append(_make_point(kin, GROUND, i, j, p, up, d))

    # box vs ground
    corners = _box_corners(kin, half_box)
    for j in range(8):
        d = -corners[j][2]
        if d > -w:
            pts.append(_make_point(kin, GROUND, BOX_BODY, j, corners[j], up, d))

    # robot links vs box (skip while the box is welded to the head)
    if not state.latched:
        for i in range(N_LINKS):
            r = model.links[i].radius
            for j, e in enumerate(capsule_segment(model, kin, i)):
                sd, surf, n = _point_vs_cuboid(e, kin.box_pos, kin.box_R, half_box)
                d = r - sd
                if d > -w:
                    pts.append(_make_point(kin, BOX_BODY, i, j, surf, n, d))

    # static cuboids (platform, ramp)
    for terrain_id, solid in ((PLATFORM, scene.platform), (RAMP, scene.ramp)):
        if solid is None:
            continue
        R = solid.rot_matrix()
        for i in range(N_LINKS):
            r = model.links[i].radius
            for j, e in enumerate(capsule_segment(model, kin, i)):
                sd, surf, n = _point_vs_cuboid(e, solid.center, R, solid.half_extents)
                d = r - sd
                if d > -w:
                    pts.append(_make_point(kin, terrain_id, i, j, surf, n, d))
        for j in range(8):
            sd, surf, n = _point_vs_cuboid(corners[j], solid.center, R, solid.half_extents)
            d = -sd
            if d > -w:
                pts.append(_make_point(kin, terrain_id, BOX_BODY, j, corners[j], n, d))

    # robot self-contact (adjacent links excluded: they share a joint)
    if params.self_contact:
        for i in range(N_LINKS):
            a0, a1 = capsule_segment(model, kin, i)
            for j in range(i + 2, N_LINKS):
                b0, b1 = capsule_segment(model, kin, j)
                ca, cb = _segment_closest(a0, a1, b0, b1)
                delta = cb - ca
                dist = float(np.linalg.norm(delta))
                if dist < 1e-9:
                    continue
                d = model.links[i].radius + model.links[j].radius - dist
                if d > -w:
                    n = delta / dist
                    pts.append(_make_point(kin, i, j, 0, 0.5 * (ca + cb), n, d))

    return ContactSet(points=pts)


def resolve_forces(contact_set, params=None):
    """Evaluate the penalty normal and stick-slip friction laws in place."""
    params = params if params is not None else ContactParams()
    for pt in contact_set.points:
        pt.f_N = normal_force(pt.d, pt.d_dot, params.normal)
        pt.f_T = friction_force(pt.f_N, pt.v_t, params.friction)
    return contact_set


def delassus(contact_set, model, scene, state, tau=None, kin=None, eps=1e-7):
    """Delassus system G = Jc M^-1 Jc^T, c = Jc_dot u + Jc M^-1 h.

    Jc_dot u is obtained by finite-differencing the stacked Jacobian along
    the current flow over eps seconds.
    """
    from . import dynamics as dyn

    kin = kin if kin is not None else compute_kinematics(model, state)
    Jc = contact_set.stacked_jacobian()
    M = dyn.mass_matrix(model, scene, state, kin)
    if state.latched:
        M = M[:NU_ROBOT, :NU_ROBOT]
        Jc_used = Jc[:, :NU_ROBOT]
    else:
        Jc_used = Jc
    tau = np.zeros(N_LINKS - 1) if tau is None else tau
    h = dyn.bias_forces(model, scene, state, tau, kin)
    h = h[:NU_ROBOT] if state.latched else h
    Minv_Jt = np.linalg.solve(M, Jc_used.T)
    G = Jc_used @ Minv_Jt
    c = Jc_used @ np.linalg.solve(M, h)

    if len(contact_set) and eps > 0:
        shifted = state.copy()
        shifted.q = dyn._advance_q(state.q, state.u, eps)
        kin2 = compute_kinematics(model, shifted)
        J2 = _rebuild_jacobian(contact_set, model, scene, kin2)
        J2 = J2[:, :NU_ROBOT] if state.latched else J2
        u = state.u[:NU_ROBOT] if state.latched else state.u
        c = c + ((J2 - Jc_used) / eps) @ u
    return DelassusSystem(G=G, c=c)


def _rebuild_jacobian(contact_set, model, scene, kin):
    """Re-derive each point's Jacobian rows at a perturbed kinematic state,
    keeping the feature assignment fixed."""
    half_box = scene.box_half_extents()
    up = np.array([0.0, 0.0, 1.0])
    rows = []
    for pt in contact_set.points:
        a, b, j = pt.body_a, pt.body_b, pt.feature
        if a == GROUND and b != BOX_BODY:
            e = capsule_segment(model, kin, b)[j]
            p, n = e - model.links[b].radius * up, up
        elif a == GROUND:
            p, n = _box_corners(kin, half_box)[j], up
        elif a == BOX_BODY:
            e = capsule_segment(model, kin, b)[j]
            _, p, n = _point_vs_cuboid(e, kin.box_pos, kin.box_R, half_box)
        elif a in (PLATFORM, RAMP):
            solid = scene.platform if a == PLATFORM else scene.ramp
            R = solid.rot_matrix()
            if b == BOX_BODY:
                p = _box_corners(kin, half_box)[j]
                _, _, n = _point_vs_cuboid(p, solid.center, R, solid.half_extents)
            else:
                e = capsule_segment(model, kin, b)[j]
                _, p, n = _point_vs_cuboid(e, solid.center, R, solid.half_extents)
        else:  # self contact
            a0, a1 = capsule_segment(model, kin, a)
            b0, b1 = capsule_segment(model, kin, b)
            ca, cb = _segment_closest(a0, a1, b0, b1)
            n = (cb - ca) / np.linalg.norm(cb - ca)
            p = 0.5 * (ca + cb)
        t1, t2 = _tangent_basis(n)
        J = point_jacobian_linear(kin, b, p) if b >= 0 else np.zeros((3, NU))
        if a >= 0:
            J = J - point_jacobian_linear(kin, a, p)
        rows.append(np.vstack([n, t1, t2]) @ J)
    return np.vstack(rows)


def complementarity_residual(contact_set, params=None):
    """Sum of |max(g - w, 0) * f_N|: force must vanish once separated beyond
    the transition width."""
    params = params if params is not None else ContactParams()
    w = params.normal.w
    total = 0.0
    for pt in contact_set.points:
        total += abs(max(pt.separation - w, 0.0) * pt.f_N)
    return total
