import numpy as np
import pytest

from conftest import random_state
from snake_locomanip import contact as ct
from snake_locomanip import dynamics as dyn
from snake_locomanip import model as mdl
from snake_locomanip.config import default_config
from snake_locomanip.kinematics import BOX_BODY, compute_kinematics


def settled_box_state(scene, n_corners=4):
    """Box alone on the ground, corners pre-loaded to carry its weight."""
    cfg = default_config()
    d = mdl.settle_penetration(scene.box_mass * scene.gravity / n_corners, cfg["contact"])
    state = mdl.initial_pose("flat_push")
    state.q[mdl.Q_BASE_POS][2] = 5.0  # robot lifted clear
    state.q[mdl.Q_BOX_POS] = [0.8, 0.3, scene.box_half_extents()[2] - d]
    return state


# ---------------------------------------------------------------- force laws


def test_smoothstep_anchors():
    assert ct.smoothstep(0.0) == 0.0
    assert ct.smoothstep(0.5) == pytest.approx(0.5)
    assert ct.smoothstep(1.0) == 1.0
    assert ct.smoothstep(-3.0) == 0.0
    assert ct.smoothstep(7.0) == 1.0


def test_normal_force_hand_values():
    p = ct.NormalForceParams()  # k=1e4, b=1e3, w=1e-3
    assert ct.normal_force(1e-3, 0.0, p) == pytest.approx(10.0)
    assert ct.normal_force(5e-4, 0.0, p) == pytest.approx(2.5)
    assert ct.normal_force(-1e-4, 0.0, p) == 0.0
    # fast separation: damper would pull, force floors at zero
    assert ct.normal_force(1e-3, -0.5, p) == 0.0
    # damping adds on approach
    assert ct.normal_force(1e-3, 0.01, p) == pytest.approx(20.0)


def test_normal_force_continuous_at_touchdown():
    p = ct.NormalForceParams()
    assert ct.normal_force(1e-9, 0.0, p) < 1e-10


def test_friction_coefficient_profile():
    p = ct.FrictionParams()  # mu_s=0.7 mu_d=0.5 v_crit=1e-3 v_stick=1e-4
    assert ct.effective_friction_coefficient(0.0, p) == 0.0
    assert ct.effective_friction_coefficient(p.v_stick, p) == pytest.approx(0.7)
    assert ct.effective_friction_coefficient(p.v_crit, p) == pytest.approx(0.7)
    assert ct.effective_friction_coefficient(100 * p.v_crit, p) == pytest.approx(0.5, abs=1e-9)
    with pytest.raises(ValueError):
        ct.effective_friction_coefficient(-1.0, p)


def test_friction_coefficient_peak_at_v_crit():
    p = ct.FrictionParams()
    vs = np.geomspace(1e-6, 1.0, 400)
    mus = [ct.effective_friction_coefficient(v, p) for v in vs]
    assert max(mus) <= 0.7 + 1e-12


def test_friction_force_direction_and_magnitude():
    p = ct.FrictionParams()
    f = ct.friction_force(10.0, [p.v_crit, 0.0], p)
    assert np.allclose(f, [-7.0, 0.0])
    assert np.allclose(ct.friction_force(10.0, [0.0, 0.0], p), 0.0)
    assert np.allclose(ct.friction_force(0.0, [1.0, 0.0], p), 0.0)


def test_friction_dissipates():
    p = ct.FrictionParams()
    rng = np.random.default_rng(0)
    for _ in range(100):
        v = rng.normal(size=2) * 10.0 ** rng.uniform(-5, 0)
        f = ct.friction_force(float(rng.uniform(0, 20)), v, p)
        assert f @ v <= 0.0


def test_params_from_config():
    p = ct.ContactParams.from_config(default_config())
    assert p.normal.k == 1.0e4
    assert p.friction.v_stick == pytest.approx(1.0e-4)
    assert p.self_contact is False


# ----------------------------------------------------------------- detection


def test_detect_straight_chain_on_ground(robot, scene):
    state = mdl.initial_pose("flat_push")
    cs = ct.detect_contacts(robot, scene, state)
    ground_link = [p for p in cs.points if p.body_a == ct.GROUND and p.body_b < BOX_BODY]
    box_ground = [p for p in cs.points if p.body_a == ct.GROUND and p.body_b == BOX_BODY]
    assert len(ground_link) == 24  # both capsule ends of all 12 links
    assert len(box_ground) == 4
    assert len(cs) == 28
    for p in ground_link + box_ground:
        assert np.allclose(p.n, [0, 0, 1])
        assert p.d > 0
    # the four box corners share one penetration depth
    ds = [p.d for p in box_ground]
    assert np.ptp(ds) < 1e-12


def test_detect_nothing_when_airborne(robot, scene):
    state = mdl.initial_pose("flat_push")
    state.q[mdl.Q_BASE_POS][2] += 1.0
    state.q[mdl.Q_BOX_POS][2] += 1.0
    cs = ct.detect_contacts(robot, scene, state)
    assert len(cs) == 0


def test_detect_link_box(robot, scene):
    state = mdl.initial_pose("flat_push")
    # slide the box onto the chain: face at y = -0.1 closer than link radius
    state.q[mdl.Q_BOX_POS] = [0.8, 0.14, 0.1]
    cs = ct.detect_contacts(robot, scene, state)
    lb = [p for p in cs.points if p.body_a == BOX_BODY]
    assert lb
    for p in lb:
        assert np.allclose(p.n, [0, -1, 0])  # pushes the link away from the box
        assert p.d > 0


def test_detect_skips_link_box_while_latched(robot, scene):
    state = mdl.initial_pose("lift_place")
    cs = ct.detect_contacts(robot, mdl.build_scene(scenario="lift_place"), state)
    assert not any(p.body_a == BOX_BODY for p in cs.points)


def test_detect_box_on_platform():
    scene = mdl.build_scene(scenario="pick_place")
    state = mdl.initial_pose("pick_place")
    cs = ct.detect_contacts(mdl.build_default_robot(), scene, state)
    plat = [p for p in cs.points if p.body_a == ct.PLATFORM]
    assert len(plat) == 4
    for p in plat:
        assert p.body_b == BOX_BODY
        assert np.allclose(p.n, [0, 0, 1])
        assert p.d > 0


def test_detect_box_on_ramp_surface():
    cfg = default_config()
    scene = mdl.build_scene(cfg, "ramp_ascent")
    robot = mdl.build_default_robot(cfg)
    state = mdl.initial_pose("ramp_ascent")
    R = scene.ramp.rot_matrix()
    n_surf = R @ np.array([0.0, 0.0, 1.0])
    surf_mid = np.array(scene.ramp.center) + R @ np.array([0.0, 0.0, scene.ramp.half_extents[2]])
    half_z = scene.box_half_extents()[2]
    state.q[mdl.Q_BOX_POS] = surf_mid + n_surf * (half_z - 2e-4)
    from scipy.spatial.transform import Rotation

    xyzw = Rotation.from_matrix(R).as_quat()
    state.q[mdl.Q_BOX_QUAT] = np.r_[xyzw[3], xyzw[:3]]
    state.q[mdl.Q_BASE_POS][2] = 5.0
    cs = ct.detect_contacts(robot, scene, state)
    on_ramp = [p for p in cs.points if p.body_a == ct.RAMP]
    assert len(on_ramp) == 4
    for p in on_ramp:
        assert np.allclose(p.n, n_surf, atol=1e-9)
        assert abs(p.d - 2e-4) < 1e-6


def _loop_pose():
    """Three 2-rad yaws curl the front of the chain back onto the head."""
    state = mdl.initial_pose("flat_push")
    state.q[mdl.Q_JOINTS][[0, 2, 4]] = 2.0
    return state


def test_self_contact_off_by_default(robot, scene):
    cs = ct.detect_contacts(robot, scene, _loop_pose())
    assert not any(p.body_a >= 0 and p.body_b >= 0 and p.body_a != BOX_BODY for p in cs.points)


def test_self_contact_hairpin(robot, scene):
    state = _loop_pose()
    params = ct.ContactParams(self_contact=True)
    cs = ct.detect_contacts(robot, scene, state, params)
    pairs = [(p.body_a, p.body_b) for p in cs.points if 0 <= p.body_a < BOX_BODY and 0 <= p.body_b < BOX_BODY]
    assert pairs
    for a, b in pairs:
        assert b >= a + 2


def test_point_vs_cuboid_geometry():
    c = np.zeros(3)
    R = np.eye(3)
    half = np.array([1.0, 2.0, 3.0])
    sd, surf, n = ct._point_vs_cuboid(np.array([2.0, 0.0, 0.0]), c, R, half)
    assert sd == pytest.approx(1.0)
    assert np.allclose(surf, [1, 0, 0])
    assert np.allclose(n, [1, 0, 0])
    # interior point projects to the nearest face
    sd, surf, n = ct._point_vs_cuboid(np.array([0.9, 0.0, 0.0]), c, R, half)
    assert sd == pytest.approx(-0.1)
    assert np.allclose(surf, [1, 0, 0])
    assert np.allclose(n, [1, 0, 0])
    # corner region: diagonal normal
    sd, surf, n = ct._point_vs_cuboid(np.array([2.0, 3.0, 0.0]), c, R, half)
    assert sd == pytest.approx(np.sqrt(2.0))
    assert np.allclose(n, [np.sqrt(0.5), np.sqrt(0.5), 0.0])


def test_gap_rate_matches_jacobian(robot, scene):
    rng = np.random.default_rng(1)
    state = mdl.initial_pose("flat_push")
    state.u[:] = rng.normal(scale=0.3, size=mdl.NU)
    cs = ct.detect_contacts(robot, scene, state)
    assert len(cs) > 0
    for p in cs.points:
        rel = p.W @ state.u
        assert rel[0] == pytest.approx(-p.d_dot, abs=1e-12)
        assert np.allclose(rel[1:], p.v_t, atol=1e-12)


def test_contact_frames_orthonormal(robot, scene):
    rng = np.random.default_rng(2)
    state = random_state(rng)
    state.q[mdl.Q_BASE_POS][2] = 0.3
    state.q[mdl.Q_BOX_POS][2] = 0.08
    cs = ct.detect_contacts(robot, scene, state)
    for p in cs.points:
        F = np.vstack([p.n, p.t1, p.t2])
        assert np.allclose(F @ F.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(F) == pytest.approx(1.0)


# ----------------------------------------------------------------- statics


def test_settled_box_supports_weight(robot, scene):
    state = settled_box_state(scene)
    cs = ct.resolve_forces(ct.detect_contacts(robot, scene, state))
    box_pts = [p for p in cs.points if p.body_b == BOX_BODY]
    assert len(box_pts) == 4
    total = sum(p.f_N for p in box_pts)
    assert total == pytest.approx(scene.box_mass * scene.gravity, rel=0.01)
    # no sliding, no friction
    assert all(np.allclose(p.f_T, 0.0) for p in box_pts)


def test_settled_box_equilibrium(robot, scene):
    state = settled_box_state(scene)
    cs = ct.resolve_forces(ct.detect_contacts(robot, scene, state))
    q_ext = dyn.generalized_contact_force(cs)
    udot = dyn.forward_dynamics(mdl.build_default_robot(), scene, state, np.zeros(11), q_ext)
    assert np.linalg.norm(udot[17:]) < 1e-6


def test_sliding_box_friction_magnitude(robot, scene):
    state = settled_box_state(scene)
    state.u[mdl.U_BOX_LIN] = [0.1, 0.0, 0.0]  # fast sliding: mu -> mu_d
    cs = ct.resolve_forces(ct.detect_contacts(robot, scene, state))
    box_pts = [p for p in cs.points if p.body_b == BOX_BODY]
    total_t = sum(np.linalg.norm(p.f_T) for p in box_pts)
    assert total_t == pytest.approx(0.5 * scene.box_mass * scene.gravity, rel=0.05)
    for p in box_pts:
        assert p.force_world() @ np.array([1.0, 0.0, 0.0]) < 0  # opposes motion


def test_generalized_force_settled_box(robot, scene):
    state = settled_box_state(scene)
    cs = ct.resolve_forces(ct.detect_contacts(robot, scene, state))
    Q = dyn.generalized_contact_force(cs)
    assert Q[19] == pytest.approx(scene.box_mass * scene.gravity, rel=0.01)
    assert np.allclose(Q[20:], 0.0, atol=1e-9)  # symmetric support: no torque


# ----------------------------------------------------------------- Delassus


def _com_contact_set(robot, scene, state):
    """Single hand-built contact at the box COM with a +z normal."""
    kin = compute_kinematics(robot, state)
    pt = ct._make_point(kin, ct.GROUND, BOX_BODY, 0, kin.box_pos, np.array([0.0, 0.0, 1.0]), 0.0)
    return ct.ContactSet(points=[pt])


def test_delassus_point_mass_limit(robot, scene):
    state = settled_box_state(scene)
    cs = _com_contact_set(robot, scene, state)
    sys = ct.delassus(cs, robot, scene, state)
    # contact at the COM: apparent inverse inertia is 1/m * I
    assert np.allclose(sys.G, np.eye(3) / scene.box_mass, atol=1e-12)
    assert sys.c[0] == pytest.approx(-scene.gravity)
    assert np.allclose(sys.c[1:], 0.0, atol=1e-9)


def test_delassus_psd_and_symmetric(robot, scene):
    state = mdl.initial_pose("flat_push")
    cs = ct.detect_contacts(robot, scene, state)
    sys = ct.delassus(cs, robot, scene, state)
    assert sys.G.shape == (3 * len(cs), 3 * len(cs))
    assert np.max(np.abs(sys.G - sys.G.T)) < 1e-9
    assert np.linalg.eigvalsh(sys.G)[0] > -1e-10


def test_delassus_duplicate_contacts_rank_deficient(robot, scene):
    state = settled_box_state(scene)
    cs = _com_contact_set(robot, scene, state)
    cs.points.append(cs.points[0])
    sys = ct.delassus(cs, robot, scene, state)
    evals = np.linalg.eigvalsh(sys.G)
    assert evals[0] < 1e-10  # duplicated rows collapse the range
    assert evals[-1] > 0


def test_delassus_resting_corner_acceleration(robot, scene):
    # without contact forces every supported corner accelerates at -g
    state = settled_box_state(scene)
    cs = ct.detect_contacts(robot, scene, state)
    box_rows = [i for i, p in enumerate(cs.points) if p.body_b == BOX_BODY]
    sys = ct.delassus(cs, robot, scene, state)
    for i in box_rows:
        assert sys.c[3 * i] == pytest.approx(-scene.gravity, rel=1e-6)


def test_delassus_latched_dimensions(robot):
    scene = mdl.build_scene(scenario="lift_place")
    state = mdl.initial_pose("lift_place")
    cs = ct.detect_contacts(robot, scene, state)
    assert len(cs) > 0
    sys = ct.delassus(cs, robot, scene, state)
    assert sys.G.shape == (3 * len(cs), 3 * len(cs))
    assert np.linalg.eigvalsh(sys.G)[0] > -1e-10


# --------------------------------------------------------- complementarity


def test_complementarity_residual_examples(robot, scene):
    state = settled_box_state(scene)
    cs = ct.resolve_forces(ct.detect_contacts(robot, scene, state))
    assert ct.complementarity_residual(cs) == 0.0
    # a separated point carrying force is charged for the violation
    kin = compute_kinematics(robot, state)
    pt = ct._make_point(kin, ct.GROUND, BOX_BODY, 0, kin.box_pos, np.array([0.0, 0.0, 1.0]), -0.1)
    pt.f_N = 1.0
    assert ct.complementarity_residual(ct.ContactSet(points=[pt])) == pytest.approx(0.099)


def test_dropped_box_comes_to_rest(robot, scene):
    # integration smoke test: box dropped from 5 cm settles without bouncing away
    state = settled_box_state(scene)
    state.q[mdl.Q_BOX_POS][2] += 0.05
    params = ct.ContactParams()
    cfg = dyn.IntegratorConfig(dt=1e-4)
    for _ in range(8000):
        cs = ct.resolve_forces(ct.detect_contacts(robot, scene, state, params), params)
        state = dyn.step(robot, scene, state, np.zeros(11), cs, cfg)
    assert np.linalg.norm(state.u[mdl.U_BOX_LIN]) < 1e-3
    z = state.q[mdl.Q_BOX_POS][2]
    assert abs(z - scene.box_half_extents()[2]) < 2e-3
