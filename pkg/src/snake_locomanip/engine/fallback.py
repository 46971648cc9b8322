"""Pure-python rollout kernel.

Reference implementation of the fixed-step simulation loop: sample joint
references, apply PD + hard-stop torques, detect and resolve contacts with
the penalty laws, integrate, and maintain the energy/effort accumulators.
The compiled kernel in `_core` reproduces this loop; the parity test keeps
the two within solver round-off of each other.
"""

import numpy as np

from .. import contact as ct
from .. import dynamics as dyn
from ..kinematics import BOX_BODY, compute_kinematics, point_jacobian_linear, point_velocity
from ..model import (
    NU,
    NU_ROBOT,
    U_JOINTS,
    SystemState,
    _store_dock_transform,
    head_tip_frame,
)
from . import types as T

LATCH_CODES = {"none": 0, "engage": 1, "release": 2, "shake": 3}
ENGAGE_TOLERANCE = 0.06  # m, head tip to socket


def socket_point(scene, kin):
    return kin.box_pos + kin.box_R @ np.asarray(scene.socket_offset)


def _try_engage(scene, state, kin):
    tip, _ = head_tip_frame(state.q)
    gap = np.linalg.norm(tip - socket_point(scene, kin))
    if gap < ENGAGE_TOLERANCE:
        state.latched = True
        _store_dock_transform(state)
        dyn._slave_box(state)
        return True
    return False


def _box_weld_power(scene, kin, udot):
    """Power the latch weld transmits to the box (m(a - g)·v + (I wdot + w x I w)·w)."""
    m = scene.box_mass
    Jv = point_jacobian_linear(kin, BOX_BODY, kin.box_pos)
    a = Jv @ udot + kin.a_com_bias[BOX_BODY]
    g = np.array([0.0, 0.0, -scene.gravity])
    v = kin.v_com[BOX_BODY]
    w = kin.omega[BOX_BODY]
    Iw = kin.box_R @ np.diag(scene.box_inertia_diag()) @ kin.box_R.T
    wdot = udot[3:6] + kin.alpha_bias[BOX_BODY]  # welded: shares base angular accel
    tau_weld = Iw @ wdot + np.cross(w, Iw @ w)
    return m * (a - g) @ v + tau_weld @ w


def run(model, scene, state0, q_ref, qd_ref, latch_cmd, dt, sample_stride,
        params=None, gains=None, record=True):
    """Integrate n = len(q_ref) steps from state0, recording every
    sample_stride-th state (plus the final one)."""
    params = params if params is not None else ct.ContactParams()
    gains = gains if gains is not None else dyn.JointGains()
    n = len(q_ref)
    n_samples = n // sample_stride + 1
    traj = T.allocate(n_samples)

    state = state0.copy()
    w_loc = w_box = effort = 0.0
    sample = 0

    for i in range(n + 1):
        kin = compute_kinematics(model, state)
        if i < n:
            cmd = int(latch_cmd[i])
            if cmd == 1 and not state.latched:
                if _try_engage(scene, state, kin):
                    kin = compute_kinematics(model, state)
            elif cmd == 2 and state.latched:
                state.latched = False
                kin = compute_kinematics(model, state)
            tau = dyn.joint_pd_torques(state, q_ref[i], qd_ref[i], gains)
        elif n > 0:
            tau = dyn.joint_pd_torques(state, q_ref[-1], qd_ref[-1], gains)
        else:
            tau = np.zeros(11)

        if record and (i % sample_stride == 0 or i == n):
            traj.t[sample] = state.t
            traj.q[sample] = state.q
            traj.u[sample] = state.u
            traj.tau[sample] = tau
            traj.latched[sample] = state.latched
            traj.w_loc[sample] = w_loc
            traj.w_box[sample] = w_box
            traj.effort[sample] = effort
            sample += 1
        if i == n:
            break

        cs = ct.resolve_forces(ct.detect_contacts(model, scene, state, params, kin), params)
        y = dyn.generalized_contact_force(cs)
        q_ext = y.copy()
        q_ext[U_JOINTS] += dyn.joint_limit_torques(state, gains)

        M = dyn.mass_matrix(model, scene, state, kin)
        h = dyn.bias_forces(model, scene, state, tau, kin)
        if state.latched:
            sl = slice(0, NU_ROBOT)
            udot = np.zeros(NU)
            udot[sl] = np.linalg.solve(M[sl, sl], (h + q_ext)[sl])
            xh = np.linalg.solve(M[sl, sl], h[sl])
            xy = np.linalg.solve(M[sl, sl], y[sl])
            effort_inst = 0.5 * y[sl] @ xy + y[sl] @ xh
        else:
            udot = np.linalg.solve(M, h + q_ext)
            xh = np.linalg.solve(M, h)
            xy = np.linalg.solve(M, y)
            effort_inst = 0.5 * y @ xy + y @ xh

        if not np.all(np.isfinite(udot)):
            traj.status = T.STATUS_NONFINITE
            traj.status_step = i
            break

        # accumulators
        w_loc += dt * float(np.sum(np.abs(tau * state.u[U_JOINTS])))
        effort += dt * effort_inst
        p_box = 0.0
        for pt in cs.points:
            if pt.body_a == BOX_BODY:  # robot link pressing on the box
                f_on_box = -pt.force_world()
                p_box += f_on_box @ point_velocity(kin, BOX_BODY, pt.p)
        if state.latched:
            p_box += _box_weld_power(scene, kin, udot)
        w_box += dt * p_box

        # semi-implicit Euler
        state.u = state.u + dt * udot
        if state.latched:
            state.u[NU_ROBOT:] = 0.0
        state.q = dyn._advance_q(state.q, state.u, dt)
        state.t += dt
        if state.latched:
            dyn._slave_box(state)
        from ..rotations import quat_normalize

        state.q[3:7] = quat_normalize(state.q[3:7])
        state.q[21:25] = quat_normalize(state.q[21:25])
        if not np.all(np.isfinite(state.q)):
            traj.status = T.STATUS_NONFINITE
            traj.status_step = i
            break

    if sample < n_samples:  # truncated run
        traj.t = traj.t[:sample]
        traj.q = traj.q[:sample]
        traj.u = traj.u[:sample]
        traj.tau = traj.tau[:sample]
        traj.latched = traj.latched[:sample]
        traj.w_loc = traj.w_loc[:sample]
        traj.w_box = traj.w_box[:sample]
        traj.effort = traj.effort[:sample]
    return traj
