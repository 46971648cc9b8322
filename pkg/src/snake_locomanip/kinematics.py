"""Forward kinematics and velocity/bias-acceleration recursion for the chain.

Everything downstream (mass matrix, bias forces, contact Jacobians) consumes
the `Kinematics` cache computed here, so each evaluation walks the chain
exactly once.
"""

from dataclasses import dataclass

import numpy as np

from .model import (
    N_JOINTS,
    N_LINKS,
    NU,
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
from .rotations import axis_angle_matrix, quat_to_matrix, skew

BOX_BODY = N_LINKS  # body index of the box (0..11 are links)


@dataclass
class Kinematics:
    """World-frame pose, velocity and bias-acceleration of every body."""

    link_pos: np.ndarray  # (12, 3) link centers
    link_R: np.ndarray  # (12, 3, 3)
    joint_pos: np.ndarray  # (11, 3)
    joint_axis: np.ndarray  # (11, 3) world axes
    com: np.ndarray  # (13, 3) link COMs + box COM
    omega: np.ndarray  # (13, 3)
    v_com: np.ndarray  # (13, 3)
    alpha_bias: np.ndarray  # (13, 3) angular acceleration at zero udot
    a_com_bias: np.ndarray  # (13, 3) COM acceleration at zero udot
    base_pos: np.ndarray
    box_pos: np.ndarray
    box_R: np.ndarray
    latched: bool


def compute_kinematics(model, state):
    q, u = state.q, state.u
    L = model.module_length
    half = np.array([L / 2.0, 0.0, 0.0])

    link_pos = np.zeros((N_LINKS, 3))
    link_R = np.zeros((N_LINKS, 3, 3))
    joint_pos = np.zeros((N_JOINTS, 3))
    joint_axis = np.zeros((N_JOINTS, 3))
    omega = np.zeros((N_LINKS + 1, 3))
    v_ctr = np.zeros((N_LINKS, 3))  # link-center velocities
    alpha = np.zeros((N_LINKS + 1, 3))
    a_ctr = np.zeros((N_LINKS, 3))  # bias acceleration of link centers

    link_pos[0] = q[Q_BASE_POS]
    link_R[0] = quat_to_matrix(q[Q_BASE_QUAT])
    omega[0] = u[U_BASE_ANG]
    v_ctr[0] = u[U_BASE_LIN]

    angles = q[Q_JOINTS]
    rates = u[U_JOINTS]

    for k in range(N_JOINTS):
        parent = k
        child = k + 1
        Rp = link_R[parent]
        o = link_pos[parent] + Rp @ half
        axis_local = np.asarray(model.joints[k].axis)
        a_world = Rp @ axis_local
        Rc = Rp @ axis_angle_matrix(axis_local, angles[k])
        pc = o + Rc @ half

        joint_pos[k] = o
        joint_axis[k] = a_world
        link_R[child] = Rc
        link_pos[child] = pc

        w_p = omega[parent]
        w_c = w_p + rates[k] * a_world
        omega[child] = w_c

        r_po = o - link_pos[parent]
        v_o = v_ctr[parent] + np.cross(w_p, r_po)
        v_ctr[child] = v_o + np.cross(w_c, pc - o)

        al_c = alpha[parent] + rates[k] * np.cross(w_p, a_world)
        alpha[child] = al_c
        a_o = a_ctr[parent] + np.cross(alpha[parent], r_po) + np.cross(w_p, np.cross(w_p, r_po))
        r_oc = pc - o
        a_ctr[child] = a_o + np.cross(al_c, r_oc) + np.cross(w_c, np.cross(w_c, r_oc))

    com = np.zeros((N_LINKS + 1, 3))
    v_com = np.zeros((N_LINKS + 1, 3))
    a_com = np.zeros((N_LINKS + 1, 3))
    for i in range(N_LINKS):
        r = link_R[i] @ np.asarray(model.links[i].com_offset)
        com[i] = link_pos[i] + r
        v_com[i] = v_ctr[i] + np.cross(omega[i], r)
        a_com[i] = a_ctr[i] + np.cross(alpha[i], r) + np.cross(omega[i], np.cross(omega[i], r))

    if state.latched:
        R0 = link_R[0]
        box_pos = link_pos[0] + R0 @ state.dock_pos
        box_R = R0 @ quat_to_matrix(state.dock_quat)
        r = box_pos - link_pos[0]
        omega[BOX_BODY] = omega[0]
        v_com[BOX_BODY] = v_ctr[0] + np.cross(omega[0], r)
        alpha[BOX_BODY] = alpha[0]
        a_com[BOX_BODY] = a_ctr[0] + np.cross(alpha[0], r) + np.cross(omega[0], np.cross(omega[0], r))
    else:
        box_pos = q[Q_BOX_POS].copy()
        box_R = quat_to_matrix(q[Q_BOX_QUAT])
        omega[BOX_BODY] = u[U_BOX_ANG]
        v_com[BOX_BODY] = u[U_BOX_LIN]
    com[BOX_BODY] = box_pos

    return Kinematics(
        link_pos=link_pos,
        link_R=link_R,
        joint_pos=joint_pos,
        joint_axis=joint_axis,
        com=com,
        omega=omega,
        v_com=v_com,
        alpha_bias=alpha,
        a_com_bias=a_com,
        base_pos=link_pos[0].copy(),
        box_pos=box_pos,
        box_R=box_R,
        latched=state.latched,
    )


def capsule_segment(model, kin, i):
    """World endpoints of link i's capsule axis segment."""
    h = model.links[i].half_length
    d = kin.link_R[i][:, 0] * h
    return kin.link_pos[i] - d, kin.link_pos[i] + d


def point_jacobian_linear(kin, body, x):
    """3 x 23 Jacobian mapping u to the world velocity of point x on `body`
    (0..11 robot links, 12 box)."""
    J = np.zeros((3, NU))
    x = np.asarray(x, dtype=float)
    if body == BOX_BODY and not kin.latched:
        J[:, U_BOX_LIN] = np.eye(3)
        J[:, U_BOX_ANG] = -skew(x - kin.box_pos)
        return J
    J[:, U_BASE_LIN] = np.eye(3)
    J[:, U_BASE_ANG] = -skew(x - kin.base_pos)
    n_path = 0 if body == BOX_BODY else body
    for k in range(n_path):
        J[:, 6 + k] = np.cross(kin.joint_axis[k], x - kin.joint_pos[k])
    return J


def angular_jacobian(kin, body):
    """3 x 23 Jacobian mapping u to world angular velocity of `body`."""
    J = np.zeros((3, NU))
    if body == BOX_BODY and not kin.latched:
        J[:, U_BOX_ANG] = np.eye(3)
        return J
    J[:, U_BASE_ANG] = np.eye(3)
    n_path = 0 if body == BOX_BODY else body
    for k in range(n_path):
        J[:, 6 + k] = kin.joint_axis[k]
    return J


def point_velocity(kin, body, x):
    """World velocity of a material point x on `body` (from the recursion,
    no Jacobian assembly)."""
    c = kin.com[body]
    return kin.v_com[body] + np.cross(kin.omega[body], np.asarray(x) - c)
