"""Contact-implicit planning: an inner quadratic program over stacked
contact forces and an outer shooting method over CPG joint references.

Inner QP: minimize 1/2 f^T G f + f^T c over the product of friction cones,
solved with accelerated projected gradient descent (APGD) using the exact
second-order-cone projection. Outer loop: deterministic coordinate pattern
search over bounded CPG parameters; candidate rollouts within a sweep are
independent and may evaluate in parallel (SNAKE_LOCOMANIP_THREADS), with
selection by candidate index so parallel and serial runs agree bit-for-bit.
"""

import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import contact as ct
from . import engine
from . import gait as gait_mod
from . import dynamics as dyn
from . import metrics
from .config import default_config
from .kinematics import compute_kinematics
from .model import N_JOINTS, NU, NU_ROBOT, U_JOINTS, JOINT_POSITION_LIMIT, JOINT_TORQUE_LIMIT

DEFAULT_WEIGHTS = (10.0, 1e-3, 1e-4)


# ---------------------------------------------------------------------------
# inner contact force QP


@dataclass
class ContactQpProblem:
    G: np.ndarray  # (3m, 3m) Delassus matrix
    c: np.ndarray  # (3m,) free contact-frame acceleration
    mu: np.ndarray  # (m,) static friction coefficient per point

    def __post_init__(self):
        self.G = np.asarray(self.G, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        self.mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        if self.G.shape != (3 * len(self.mu),) * 2 or self.c.shape != (3 * len(self.mu),):
            raise ValueError("inconsistent QP dimensions")

    @property
    def n_points(self):
        return len(self.mu)

    @classmethod
    def from_contact_set(cls, contact_set, model, scene, state, params=None, tau=None):
        params = params if params is not None else ct.ContactParams()
        sys = ct.delassus(contact_set, model, scene, state, tau=tau)
        mu = np.full(len(contact_set), params.friction.mu_s)
        return cls(G=sys.G, c=sys.c, mu=mu)


def project_friction_cone(x, mu):
    """Euclidean projection of (f_N, f_T1, f_T2) onto {f_N >= 0, |f_T| <= mu f_N}."""
    fn = x[0]
    ft = np.hypot(x[1], x[2])
    if ft <= mu * fn:
        return np.asarray(x, dtype=float).copy()
    if mu * ft <= -fn:
        return np.zeros(3)
    coef = (fn + mu * ft) / (1.0 + mu * mu)
    out = np.empty(3)
    out[0] = coef
    scale = (mu * coef / ft) if ft > 0.0 else 0.0
    out[1] = scale * x[1]
    out[2] = scale * x[2]
    return out


def _project_stacked(f, mu):
    out = np.empty_like(f)
    for i in range(len(mu)):
        out[3 * i:3 * i + 3] = project_friction_cone(f[3 * i:3 * i + 3], mu[i])
    return out


@dataclass
class QpSolution:
    f: np.ndarray
    objective: float
    iterations: int
    converged: bool
    residual: float  # norm of projected-gradient stationarity residual


def solve_contact_qp(problem, tol=1e-6, max_iter=2000):
    """APGD with exact cone projection and adaptive restart."""
    n = 3 * problem.n_points
    if n == 0:
        return QpSolution(f=np.zeros(0), objective=0.0, iterations=0,
                          converged=True, residual=0.0)
    G, c, mu = problem.G, problem.c, problem.mu
    eigs = np.linalg.eigvalsh(0.5 * (G + G.T))
    scale = max(eigs[-1], 1.0)
    if eigs[0] < -1e-8 * scale:
        raise ValueError("Delassus matrix is not positive semidefinite")
    L = max(eigs[-1], 1e-12)

    f = _project_stacked(-c / L, mu)
    y = f.copy()
    theta = 1.0
    residual = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        grad = G @ y + c
        f_new = _project_stacked(y - grad / L, mu)
        # stationarity: distance between f and its projected gradient step
        grad_f = G @ f_new + c
        residual = np.linalg.norm(f_new - _project_stacked(f_new - grad_f, mu))
        if (y - f_new) @ (f_new - f) > 0.0:  # restart momentum
            y = f_new.copy()
            theta = 1.0
        else:
            theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
            y = f_new + (theta - 1.0) / theta_new * (f_new - f)
            theta = theta_new
        f = f_new
        if residual <= tol:
            break
    obj = 0.5 * f @ (G @ f) + f @ c
    return QpSolution(f=f, objective=float(obj), iterations=it,
                      converged=bool(residual <= tol), residual=float(residual))


def qp_complementarity(problem, f, tol=1e-6):
    """Max over points of min(f_N, |normal row of G f + c|): either the
    normal force vanishes or the normal acceleration does."""
    if problem.n_points == 0:
        return 0.0
    acc = problem.G @ f + problem.c
    worst = 0.0
    for i in range(problem.n_points):
        fn = f[3 * i]
        an = acc[3 * i]
        worst = max(worst, min(fn, max(an, 0.0)))
    return worst


# ---------------------------------------------------------------------------
# rollouts (penalty path delegates to the engine; qp mode for diagnostics)


def _as_timeline(timeline_or_params, T):
    if isinstance(timeline_or_params, gait_mod.GaitTimeline):
        return timeline_or_params
    if isinstance(timeline_or_params, gait_mod.CpgParams):
        seg = gait_mod.Segment(duration=max(T, 1e-9),
                               preset=gait_mod.GaitPreset("custom", timeline_or_params))
        return gait_mod.GaitTimeline(
            segments=[seg], initial=tuple(gait_mod.cpg_angles(timeline_or_params, 0.0)))
    raise TypeError("expected GaitTimeline or CpgParams")


def rollout(model, scene, timeline_or_params, T, cfg=None, state0=None,
            force_mode="penalty"):
    """Simulate T seconds of the reference; force_mode selects the penalty
    law (default, engine kernel) or the QP force resolution (python loop)."""
    cfg = cfg if cfg is not None else default_config()
    import snake_locomanip.model as mdl

    state0 = state0 if state0 is not None else mdl.initial_pose("flat_push", cfg=cfg)
    timeline = _as_timeline(timeline_or_params, T)
    if force_mode == "penalty":
        return engine.rollout(model, scene, state0, timeline, T, cfg)
    if force_mode != "qp":
        raise ValueError(f"unknown force mode {force_mode!r}")
    return _rollout_qp(model, scene, state0, timeline, T, cfg)


def _rollout_qp(model, scene, state0, timeline, T, cfg):
    from .engine import types as TT

    dt = cfg["integrator"]["dt"]
    n = int(round(T / dt))
    stride = 1 if cfg["output"]["full_rate"] else max(
        1, int(round(1.0 / (cfg["output"]["sample_hz"] * dt))))
    q_ref, qd_ref, _ = engine.build_references(timeline, n, dt)
    params = ct.ContactParams.from_config(cfg)
    gains = dyn.JointGains(
        kp=cfg["joints"]["kp"], kd=cfg["joints"]["kd"],
        limit_stiffness=cfg["joints"]["limit_stiffness"],
        limit_damping=cfg["joints"]["limit_damping"])

    n_samples = n // stride + 1
    traj = TT.allocate(n_samples)
    state = state0.copy()
    w_loc = w_box = effort = 0.0
    sample = 0
    from .kinematics import BOX_BODY, point_velocity
    from .rotations import quat_normalize

    for i in range(n + 1):
        kin = compute_kinematics(model, state)
        tau = dyn.joint_pd_torques(state, q_ref[min(i, n - 1)], qd_ref[min(i, n - 1)],
                                   gains) if n > 0 else np.zeros(11)
        if i % stride == 0 or i == n:
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

        cs = ct.detect_contacts(model, scene, state, params, kin)
        problem = ContactQpProblem.from_contact_set(cs, model, scene, state,
                                                    params, tau=tau)
        sol = solve_contact_qp(problem)
        for k, pt in enumerate(cs.points):
            pt.f_N = sol.f[3 * k]
            pt.f_T = sol.f[3 * k + 1:3 * k + 3].copy()
        y = dyn.generalized_contact_force(cs)
        q_ext = y.copy()
        q_ext[U_JOINTS] += dyn.joint_limit_torques(state, gains)
        M = dyn.mass_matrix(model, scene, state, kin)
        h = dyn.bias_forces(model, scene, state, tau, kin)
        udot = np.linalg.solve(M, h + q_ext)
        if not np.all(np.isfinite(udot)):
            traj.status = TT.STATUS_NONFINITE
            traj.status_step = i
            break

        w_loc += dt * float(np.sum(np.abs(tau * state.u[U_JOINTS])))
        effort += dt * sol.objective
        p_box = 0.0
        for pt in cs.points:
            if pt.body_a == BOX_BODY:
                p_box += (-pt.force_world()) @ point_velocity(kin, BOX_BODY, pt.p)
        w_box += dt * p_box

        state.u = state.u + dt * udot
        state.q = dyn._advance_q(state.q, state.u, dt)
        state.t += dt
        state.q[3:7] = quat_normalize(state.q[3:7])
        state.q[21:25] = quat_normalize(state.q[21:25])
        if not np.all(np.isfinite(state.q)):
            traj.status = TT.STATUS_NONFINITE
            traj.status_step = i
            break
    if sample < n_samples:
        for name in ("t", "q", "u", "tau", "latched", "w_loc", "w_box", "effort"):
            setattr(traj, name, getattr(traj, name)[:sample])
    return traj


# ---------------------------------------------------------------------------
# outer shooting method


@dataclass
class ShootingProblem:
    model: object
    scene: object
    state0: object
    goal: np.ndarray  # box target position (3,)
    horizon: float
    weights: tuple = DEFAULT_WEIGHTS
    cfg: dict = None

    def __post_init__(self):
        self.goal = np.asarray(self.goal, dtype=float)
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.cfg is None:
            self.cfg = default_config()


@dataclass
class PlannerResult:
    params: gait_mod.CpgParams
    decision: np.ndarray
    cost: float
    cost_history: list
    n_evaluations: int
    trajectory: object
    goal_error: float
    converged: bool


# decision layout: [A_yaw, A_pitch, f, phase_0..10, offset_0..10]
_LO = np.concatenate([[0.0, 0.0, 0.1], np.zeros(N_JOINTS), np.full(N_JOINTS, -20.0)])
_HI = np.concatenate([[70.0, 30.0, 1.5], np.full(N_JOINTS, 2.0 * np.pi),
                      np.full(N_JOINTS, 20.0)])
DECISION_DIM = len(_LO)


def params_to_decision(params):
    return np.concatenate([
        [params.amplitude_yaw, params.amplitude_pitch, params.frequency],
        np.mod(params.phase, 2.0 * np.pi), params.offset])


def decision_to_params(x):
    x = np.clip(x, _LO, _HI)
    return gait_mod.CpgParams(
        amplitude_yaw=float(x[0]), amplitude_pitch=float(x[1]), frequency=float(x[2]),
        phase=tuple(float(v) for v in x[3:3 + N_JOINTS]),
        offset=tuple(float(v) for v in x[3 + N_JOINTS:]))


def trajectory_cost(problem, traj):
    """w1 |box final - goal|^2 + w2 contact-effort integral + w3 int |tau|^2 dt."""
    w1, w2, w3 = problem.weights
    if traj.status != 0 or len(traj) < 2:
        return np.inf
    err = np.linalg.norm(traj.q[-1, 18:21] - problem.goal)
    tau_sq = np.sum(traj.tau ** 2, axis=1)
    t = traj.t
    tau_term = float(np.trapezoid(tau_sq, t))
    return w1 * err * err + w2 * float(traj.effort[-1]) + w3 * tau_term


def _evaluate(problem, x):
    params = decision_to_params(x)
    traj = rollout(problem.model, problem.scene, params, problem.horizon,
                   problem.cfg, state0=problem.state0.copy())
    return trajectory_cost(problem, traj), traj


def _n_workers():
    try:
        return max(1, int(os.environ.get("SNAKE_LOCOMANIP_THREADS", "1")))
    except ValueError:
        return 1


def shoot(problem, seed, budget):
    """Coordinate pattern search: per sweep, probe +/- one step along every
    coordinate, take the best strictly-improving candidate (lowest index on
    ties), halve all steps when a sweep stalls."""
    if budget < 1:
        raise ValueError("budget must be at least one evaluation")
    x = np.clip(params_to_decision(seed), _LO, _HI)
    span = _HI - _LO
    steps = 0.1 * span

    best_cost, best_traj = _evaluate(problem, x)
    evals = 1
    history = [best_cost]
    if not np.isfinite(best_cost) and budget == 1:
        raise RuntimeError("budget exhausted without a finite-cost rollout")

    workers = _n_workers()
    while evals < budget and np.max(steps / span) >= 1e-3:
        candidates = []
        for i in range(DECISION_DIM):
            for s in (+1.0, -1.0):
                xc = x.copy()
                xc[i] = np.clip(xc[i] + s * steps[i], _LO[i], _HI[i])
                if xc[i] != x[i]:
                    candidates.append(xc)
        candidates = candidates[:budget - evals]
        if not candidates:
            break
        if workers > 1 and len(candidates) > 1:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_evaluate, [problem] * len(candidates),
                                        candidates, chunksize=1))
        else:
            results = [_evaluate(problem, xc) for xc in candidates]
        evals += len(candidates)

        costs = np.array([r[0] for r in results])
        j = int(np.argmin(costs))  # ties resolve to the lowest index
        if costs[j] < best_cost:
            best_cost = float(costs[j])
            best_traj = results[j][1]
            x = candidates[j]
        else:
            steps = steps / 2.0
        history.append(best_cost)

    if not np.isfinite(best_cost):
        raise RuntimeError("budget exhausted without a finite-cost rollout")
    err = float(np.linalg.norm(best_traj.q[-1, 18:21] - problem.goal))
    return PlannerResult(
        params=decision_to_params(x), decision=x, cost=float(best_cost),
        cost_history=history, n_evaluations=evals, trajectory=best_traj,
        goal_error=err, converged=bool(np.max(steps / span) < 1e-3))


# ---------------------------------------------------------------------------
# diagnostics


def orthogonality_report(traj, model, scene, cfg=None):
    """Per-sample complementarity scalars: sum |f_N max(g - w, 0)| (force on
    separated contacts) and sum |f_N gdot| (force against normal motion)."""
    cfg = cfg if cfg is not None else default_config()
    params = ct.ContactParams.from_config(cfg)
    import snake_locomanip.model as mdl

    gap_res = np.zeros(len(traj))
    rate_res = np.zeros(len(traj))
    for i in range(len(traj)):
        s = mdl.SystemState(q=traj.q[i].copy(), u=traj.u[i].copy())
        s.latched = bool(traj.latched[i])
        cs = ct.resolve_forces(ct.detect_contacts(model, scene, s, params), params)
        gap_res[i] = ct.complementarity_residual(cs, params)
        rate_res[i] = sum(abs(pt.f_N * pt.d_dot) for pt in cs.points)
    return {
        "gap_residual": gap_res,
        "rate_residual": rate_res,
        "max_gap_residual": float(np.max(gap_res)) if len(traj) else 0.0,
        "mean_gap_residual": float(np.mean(gap_res)) if len(traj) else 0.0,
        "max_rate_residual": float(np.max(rate_res)) if len(traj) else 0.0,
        "mean_rate_residual": float(np.mean(rate_res)) if len(traj) else 0.0,
    }
