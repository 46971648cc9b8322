"""Equations of motion for the coupled robot + box system.

Convention: M(q) udot = h(q, u, tau) + sum_i J_i^T f_ext,i, where h collects
actuation, gravity and the (negated) centrifugal/Coriolis terms. At rest with
zero torque, h reduces to the generalized gravity force.
"""

from dataclasses import dataclass

import numpy as np

from .kinematics import (
    BOX_BODY,
    angular_jacobian,
    compute_kinematics,
    point_jacobian_linear,
)
from .model import (
    JOINT_POSITION_LIMIT,
    JOINT_TORQUE_LIMIT,
    N_JOINTS,
    N_LINKS,
    NU,
    NU_ROBOT,
    Q_BASE_POS,
    Q_BASE_QUAT,
    Q_BOX_POS,
    Q_BOX_QUAT,
    Q_JOINTS,
    U_BASE_ANG,
    U_BASE_LIN,
    U_BOX_ANG,
    U_BOX_LIN,
    U_JOINTS,
)
from .rotations import quat_integrate, quat_mul, quat_normalize, quat_to_matrix


class NumericalError(RuntimeError):
    """Non-finite quantity encountered during integration."""


class TorqueLimitError(ValueError):
    """Commanded torque outside the actuator envelope (planner bug)."""


@dataclass
class IntegratorConfig:
    dt: float = 1.0e-4
    scheme: str = "semi_implicit_euler"
    renorm_every: int = 1

    def __post_init__(self):
        if not (0.0 < self.dt <= 1.0e-3):
            raise ValueError("dt must be in (0, 1e-3] (penalty-contact stability bound)")
        if self.scheme not in ("semi_implicit_euler", "rk4"):
            raise ValueError(f"unknown scheme {self.scheme!r}")


@dataclass
class JointGains:
    kp: float = 50.0
    kd: float = 1.0
    limit_stiffness: float = 50.0
    limit_damping: float = 0.5


def _body_inertia_world(model, scene, kin, body):
    if body == BOX_BODY:
        I = np.diag(scene.box_inertia_diag())
        R = kin.box_R
    else:
        I = np.diag(np.asarray(model.links[body].inertia_diag))
        R = kin.link_R[body]
    return R @ I @ R.T


def _body_mass(model, scene, body):
    return scene.box_mass if body == BOX_BODY else model.links[body].mass


def mass_matrix(model, scene, state, kin=None):
    """Generalized mass-inertia matrix, 23 x 23, symmetric positive definite.

    While latched the box coordinates are slaved to the head; their block is
    set to identity and the box inertia is composited into the robot block.
    """
    if not np.all(np.isfinite(state.q)) or not np.all(np.isfinite(state.u)):
        raise NumericalError("non-finite state")
    kin = kin if kin is not None else compute_kinematics(model, state)
    M = np.zeros((NU, NU))
    for body in range(N_LINKS + 1):
        m = _body_mass(model, scene, body)
        Jv = point_jacobian_linear(kin, body, kin.com[body])
        Jw = angular_jacobian(kin, body)
        Iw = _body_inertia_world(model, scene, kin, body)
        M += m * (Jv.T @ Jv) + Jw.T @ (Iw @ Jw)
    if state.latched:
        M[NU_ROBOT:, :] = 0.0
        M[:, NU_ROBOT:] = 0.0
        M[NU_ROBOT:, NU_ROBOT:] = np.eye(NU - NU_ROBOT)
    return M


def bias_forces(model, scene, state, tau, kin=None):
    """h(q, u, tau): actuation + gravity - velocity-product terms."""
    tau = np.asarray(tau, dtype=float)
    limits = np.array([j.torque_limit for j in model.joints])
    if np.any(np.abs(tau) > limits + 1e-9):
        k = int(np.argmax(np.abs(tau) - limits))
        raise TorqueLimitError(f"joint {k + 1}: |tau|={abs(tau[k]):.3f} exceeds {limits[k]}")
    kin = kin if kin is not None else compute_kinematics(model, state)
    g_vec = np.array([0.0, 0.0, -scene.gravity])
    h = np.zeros(NU)
    for body in range(N_LINKS + 1):
        m = _body_mass(model, scene, body)
        Jv = point_jacobian_linear(kin, body, kin.com[body])
        Jw = angular_jacobian(kin, body)
        Iw = _body_inertia_world(model, scene, kin, body)
        w = kin.omega[body]
        h += Jv.T @ (m * (g_vec - kin.a_com_bias[body]))
        h -= Jw.T @ (Iw @ kin.alpha_bias[body] + np.cross(w, Iw @ w))
    h[U_JOINTS] += tau
    if state.latched:
        h[NU_ROBOT:] = 0.0
    return h


def point_jacobian(model, state, body, point, kin=None):
    """World-frame linear Jacobian of a material point given in the body frame."""
    if not (0 <= body <= BOX_BODY):
        raise ValueError(f"unknown body {body}")
    kin = kin if kin is not None else compute_kinematics(model, state)
    if body == BOX_BODY:
        x = kin.box_pos + kin.box_R @ np.asarray(point, dtype=float)
    else:
        x = kin.link_pos[body] + kin.link_R[body] @ np.asarray(point, dtype=float)
    return point_jacobian_linear(kin, body, x)


def joint_pd_torques(state, q_ref, qd_ref, gains=None):
    """Servo torques tracking clamped references, saturated at the actuator limit."""
    gains = gains if gains is not None else JointGains()
    q_ref = np.clip(np.asarray(q_ref, dtype=float), -JOINT_POSITION_LIMIT, JOINT_POSITION_LIMIT)
    err = q_ref - state.q[Q_JOINTS]
    derr = np.asarray(qd_ref, dtype=float) - state.u[U_JOINTS]
    tau = gains.kp * err + gains.kd * derr
    return np.clip(tau, -JOINT_TORQUE_LIMIT, JOINT_TORQUE_LIMIT)


def joint_limit_torques(state, gains=None):
    """Mechanical hard-stop penalty beyond the +/-90 deg travel (not part of
    the servo torque, so not subject to the actuator saturation)."""
    gains = gains if gains is not None else JointGains()
    q = state.q[Q_JOINTS]
    qd = state.u[U_JOINTS]
    over = np.maximum(q - JOINT_POSITION_LIMIT, 0.0) - np.maximum(-JOINT_POSITION_LIMIT - q, 0.0)
    tau = -gains.limit_stiffness * over
    active = over != 0.0
    tau[active] -= gains.limit_damping * qd[active]
    return tau


def generalized_contact_force(contact_set):
    """Sum of W_i^T f_i over resolved contact points."""
    Q = np.zeros(NU)
    if contact_set is None:
        return Q
    for pt in contact_set.points:
        Q += pt.W.T @ pt.force_local()
    return Q


def forward_dynamics(model, scene, state, tau, q_ext=None, kin=None):
    """udot from M udot = h + Q_ext. Latched box rows are slaved (zero)."""
    kin = kin if kin is not None else compute_kinematics(model, state)
    M = mass_matrix(model, scene, state, kin)
    h = bias_forces(model, scene, state, tau, kin)
    rhs = h if q_ext is None else h + q_ext
    if state.latched:
        udot = np.zeros(NU)
        udot[:NU_ROBOT] = np.linalg.solve(M[:NU_ROBOT, :NU_ROBOT], rhs[:NU_ROBOT])
    else:
        udot = np.linalg.solve(M, rhs)
    if not np.all(np.isfinite(udot)):
        bad = int(np.argmax(~np.isfinite(udot)))
        raise NumericalError(f"non-finite acceleration at coordinate {bad}")
    return udot


def _advance_q(q, u, dt):
    qn = q.copy()
    qn[Q_BASE_POS] = q[Q_BASE_POS] + dt * u[U_BASE_LIN]
    qn[Q_BASE_QUAT] = quat_integrate(q[Q_BASE_QUAT], u[U_BASE_ANG], dt)
    qn[Q_JOINTS] = q[Q_JOINTS] + dt * u[U_JOINTS]
    qn[Q_BOX_POS] = q[Q_BOX_POS] + dt * u[U_BOX_LIN]
    qn[Q_BOX_QUAT] = quat_integrate(q[Q_BOX_QUAT], u[U_BOX_ANG], dt)
    return qn


def _slave_box(state):
    """Write the kinematically-derived box pose/velocity into q, u while latched."""
    R0 = quat_to_matrix(state.q[Q_BASE_QUAT])
    r = R0 @ state.dock_pos
    state.q[Q_BOX_POS] = state.q[Q_BASE_POS] + r
    state.q[Q_BOX_QUAT] = quat_normalize(quat_mul(state.q[Q_BASE_QUAT], state.dock_quat))
    w = state.u[U_BASE_ANG]
    state.u[U_BOX_ANG] = w
    state.u[U_BOX_LIN] = state.u[U_BASE_LIN] + np.cross(w, r)


def step(model, scene, state, tau, contact_set=None, cfg=None):
    """Advance one fixed step with the given (already resolved) contact forces."""
    cfg = cfg if cfg is not None else IntegratorConfig()
    dt = cfg.dt
    q_ext = generalized_contact_force(contact_set)

    if cfg.scheme == "semi_implicit_euler":
        udot = forward_dynamics(model, scene, state, tau, q_ext)
        new = state.copy()
        new.u = state.u + dt * udot
        if state.latched:
            new.u[NU_ROBOT:] = 0.0  # slaved below
        new.q = _advance_q(state.q, new.u, dt)
    else:  # rk4, contact forces held over the step
        def rates(q, u):
            s = state.copy()
            s.q, s.u = q, u
            udot = forward_dynamics(model, scene, s, tau, q_ext)
            return u, udot

        q0, u0 = state.q, state.u
        k1v, k1a = rates(q0, u0)
        k2v, k2a = rates(_advance_q(q0, k1v, dt / 2), u0 + dt / 2 * k1a)
        k3v, k3a = rates(_advance_q(q0, k2v, dt / 2), u0 + dt / 2 * k2a)
        k4v, k4a = rates(_advance_q(q0, k3v, dt), u0 + dt * k3a)
        new = state.copy()
        new.u = u0 + dt / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a)
        v_eff = (k1v + 2 * k2v + 2 * k3v + k4v) / 6.0
        new.q = _advance_q(q0, v_eff, dt)

    new.t = state.t + dt
    if state.latched:
        _slave_box(new)
    new.q[Q_BASE_QUAT] = quat_normalize(new.q[Q_BASE_QUAT])
    new.q[Q_BOX_QUAT] = quat_normalize(new.q[Q_BOX_QUAT])
    if not np.all(np.isfinite(new.q)):
        bad = int(np.argmax(~np.isfinite(new.q)))
        raise NumericalError(f"non-finite coordinate q[{bad}] after step")
    return new
