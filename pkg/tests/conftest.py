import numpy as np
import pytest

from snake_locomanip import model as mdl
from snake_locomanip.dynamics import _advance_q
from snake_locomanip.kinematics import BOX_BODY, compute_kinematics
from snake_locomanip.model import N_LINKS, NQ, NU
from snake_locomanip.rotations import quat_normalize


@pytest.fixture(scope="session")
def robot():
    return mdl.build_default_robot()


@pytest.fixture(scope="session")
def scene():
    return mdl.build_scene()


def random_state(rng, joint_scale=1.0, vel_scale=1.0):
    """A random reachable state: bounded joints, unit quaternions, box nearby."""
    q = np.zeros(NQ)
    q[mdl.Q_BASE_POS] = rng.uniform(-1, 1, 3) + [0, 0, 1.0]
    q[mdl.Q_BASE_QUAT] = quat_normalize(rng.normal(size=4))
    q[mdl.Q_JOINTS] = rng.uniform(-1.2, 1.2, 11) * joint_scale
    q[mdl.Q_BOX_POS] = rng.uniform(-1, 1, 3) + [0, 0, 1.0]
    q[mdl.Q_BOX_QUAT] = quat_normalize(rng.normal(size=4))
    u = rng.normal(scale=vel_scale, size=NU)
    return mdl.SystemState(q=q, u=u)


def shift_state(state, direction, eps):
    """State displaced along one generalized-velocity direction (quaternion-aware)."""
    out = state.copy()
    out.q = _advance_q(state.q, np.asarray(direction, dtype=float), eps)
    return out


def potential_energy(model, scene, state):
    kin = compute_kinematics(model, state)
    V = 0.0
    for i in range(N_LINKS):
        V += model.links[i].mass * scene.gravity * kin.com[i][2]
    V += scene.box_mass * scene.gravity * kin.com[BOX_BODY][2]
    return V


def kinetic_energy(model, scene, state):
    kin = compute_kinematics(model, state)
    T = 0.0
    for body in range(N_LINKS + 1):
        if body == BOX_BODY:
            m = scene.box_mass
            Iw = kin.box_R @ np.diag(scene.box_inertia_diag()) @ kin.box_R.T
        else:
            m = model.links[body].mass
            Iw = kin.link_R[body] @ np.diag(model.links[body].inertia_diag) @ kin.link_R[body].T
        v, w = kin.v_com[body], kin.omega[body]
        T += 0.5 * m * v @ v + 0.5 * w @ Iw @ w
    return T


def total_momentum(model, scene, state):
    """(linear momentum, angular momentum about the world origin)."""
    kin = compute_kinematics(model, state)
    p = np.zeros(3)
    L = np.zeros(3)
    for body in range(N_LINKS + 1):
        if body == BOX_BODY:
            m = scene.box_mass
            Iw = kin.box_R @ np.diag(scene.box_inertia_diag()) @ kin.box_R.T
        else:
            m = model.links[body].mass
            Iw = kin.link_R[body] @ np.diag(model.links[body].inertia_diag) @ kin.link_R[body].T
        p += m * kin.v_com[body]
        L += np.cross(kin.com[body], m * kin.v_com[body]) + Iw @ kin.omega[body]
    return p, L
