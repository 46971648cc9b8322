"""Marshals models and state into the flat arrays the compiled kernel takes.

The kernel hardcodes the chain topology (12 capsule links, alternating
yaw/pitch joints, box, static cuboids); `check_supported` verifies the model
actually matches before dispatching to it.
"""

import numpy as np

from ..model import JOINT_POSITION_LIMIT, JOINT_TORQUE_LIMIT, N_JOINTS, N_LINKS
from . import fallback, types as T


class UnsupportedModel(ValueError):
    """Model/scene shape outside what the compiled kernel implements."""


def check_supported(model, params):
    if len(model.links) != N_LINKS or len(model.joints) != N_JOINTS:
        raise UnsupportedModel("kernel supports the 12-link chain only")
    r = model.links[0].radius
    hl = model.links[0].half_length
    for i, link in enumerate(model.links):
        if any(abs(c) > 0 for c in link.com_offset):
            raise UnsupportedModel("kernel assumes centered link COMs")
        if link.radius != r or link.half_length != hl:
            raise UnsupportedModel("kernel assumes uniform capsule geometry")
    for k, joint in enumerate(model.joints):
        want = (0.0, 0.0, 1.0) if k % 2 == 0 else (0.0, 1.0, 0.0)
        if tuple(joint.axis) != want:
            raise UnsupportedModel("kernel assumes alternating yaw/pitch axes")
        if joint.torque_limit != JOINT_TORQUE_LIMIT or joint.position_limit != JOINT_POSITION_LIMIT:
            raise UnsupportedModel("kernel assumes uniform joint limits")
    if params.self_contact:
        raise UnsupportedModel("self-contact runs use the python kernel")


def pack_statics(scene):
    rows = []
    for solid in (scene.platform, scene.ramp):
        if solid is None:
            continue
        row = np.zeros(16)
        row[0:3] = solid.center
        row[3:6] = solid.half_extents
        row[6:15] = solid.rotation
        rows.append(row)
    if not rows:
        return np.zeros((0, 16))
    return np.ascontiguousarray(rows)


def run_compiled(core, model, scene, state0, q_ref, qd_ref, latch_cmd, dt, stride,
                 params, gains):
    check_supported(model, params)
    n = len(q_ref)
    n_samples = n // stride + 1
    traj = T.allocate(n_samples)

    q = state0.q.copy()
    u = state0.u.copy()
    latch_io = np.array([1 if state0.latched else 0], dtype=np.int32)
    dock = np.concatenate([state0.dock_pos, state0.dock_quat])

    link_mass = np.array([l.mass for l in model.links])
    link_inertia = np.ascontiguousarray([l.inertia_diag for l in model.links])
    latched_u8 = np.zeros(n_samples, dtype=np.uint8)

    status, status_step, sample = core.run(
        link_mass, link_inertia,
        model.links[0].radius, model.links[0].half_length, model.module_length,
        scene.gravity, scene.box_mass, scene.box_inertia_diag().copy(),
        scene.box_half_extents().copy(), pack_statics(scene),
        params.normal.k, params.normal.b, params.normal.w,
        params.friction.mu_s, params.friction.mu_d,
        params.friction.v_crit, params.friction.v_stick,
        gains.kp, gains.kd, gains.limit_stiffness, gains.limit_damping,
        JOINT_TORQUE_LIMIT, JOINT_POSITION_LIMIT,
        np.asarray(scene.socket_offset, dtype=float), fallback.ENGAGE_TOLERANCE,
        q, u, latch_io, dock,
        np.ascontiguousarray(q_ref), np.ascontiguousarray(qd_ref),
        np.ascontiguousarray(latch_cmd, dtype=np.int32),
        dt, stride, state0.t,
        traj.t, traj.q, traj.u, traj.tau, latched_u8,
        traj.w_loc, traj.w_box, traj.effort,
    )
    traj.latched = latched_u8.astype(bool)
    traj.status = T.STATUS_NONFINITE if status else T.STATUS_OK
    traj.status_step = status_step
    if sample < n_samples:
        for name in ("t", "q", "u", "tau", "latched", "w_loc", "w_box", "effort"):
            setattr(traj, name, getattr(traj, name)[:sample])
    return traj
