"""Receding-horizon contouring solver.

Multiple-shooting transcription with a Gauss-Newton Hessian: every cycle
linearizes dynamics, costs, and collision constraints around the current
iterate, condenses the shooting states through the linearized dynamics, and
solves the resulting dense QP (inputs plus L1 slack variables) with cvxopt.
A backtracking line search on an L1 merit function keeps steps productive;
constraint rows far from their margins are screened out of the QP but always
count toward the merit and the reported violations.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from cvxopt import matrix as cvxmat
from cvxopt import solvers as cvxsolvers

from .refpath import LocalReference

cvxsolvers.options["show_progress"] = False
# the QP noise floor must sit well below the SQP convergence tolerance
cvxsolvers.options["abstol"] = 1e-8
cvxsolvers.options["reltol"] = 1e-7
cvxsolvers.options["feastol"] = 1e-8

_ROT90 = np.array([[0.0, -1.0], [1.0, 0.0]])


def _rot(psi):
    c, s = np.cos(psi), np.sin(psi)
    return np.array([[c, -s], [s, c]])


def _psd_sqrt(m):
    w, v = np.linalg.eigh(np.asarray(m, dtype=float))
    if np.min(w) < -1e-10:
        raise ValueError("weight matrix must be positive semidefinite")
    return (v * np.sqrt(np.maximum(w, 0.0))) @ v.T


@dataclass(frozen=True)
class Weights:
    q_eps: np.ndarray          # 2x2 PSD on (contour, lag) error
    q_v: float                 # speed deviation
    q_r: float                 # obstacle repulsion
    q_u: np.ndarray            # 2x2 PSD on inputs
    gamma: float = 0.01        # repulsion regularizer

    def __post_init__(self):
        object.__setattr__(self, "q_eps", np.asarray(self.q_eps, dtype=float))
        object.__setattr__(self, "q_u", np.asarray(self.q_u, dtype=float))
        if self.q_v < 0.0 or self.q_r < 0.0 or self.gamma < 0.0:
            raise ValueError("scalar weights must be >= 0")
        object.__setattr__(self, "_l_eps", _psd_sqrt(self.q_eps))
        object.__setattr__(self, "_l_u", _psd_sqrt(self.q_u))

    @property
    def l_eps(self):
        return self._l_eps

    @property
    def l_u(self):
        return self._l_u


@dataclass(frozen=True)
class SolverParams:
    max_iterations: int = 10
    kkt_tol: float = 1e-4
    defect_tol: float = 1e-6
    feas_tol: float = 1e-6
    infeasible_slack: float = 1e-3
    penalty: float = 1e4
    line_search_trials: int = 8
    line_search_factor: float = 0.5
    screen_static: float = 0.75    # m, static rows beyond this residual stay out of the QP
    screen_dynamic: float = 8.0    # dynamic rows beyond 1 + this stay out
    reg: float = 1e-8


@dataclass(frozen=True)
class HorizonPlan:
    states: np.ndarray       # (N+1, nz)
    inputs: np.ndarray       # (N, 2)
    thetas: np.ndarray       # (N+1,)
    cost: float
    status: str              # optimal | max_iter | infeasible
    solve_time: float = 0.0  # s
    iterations: int = 0
    kkt_residual: float = float("inf")
    slack_max: float = 0.0   # worst constraint violation at the returned iterate

    @property
    def positions(self):
        return self.states[:, :2]


@dataclass
class ProblemSnapshot:
    """Immutable per-cycle inputs to the solver."""

    model: object
    tau: float
    n_steps: int
    state0: np.ndarray
    theta0: float
    ref: LocalReference
    regions: list               # N ConvexRegions for steps 1..N (may be empty)
    predictions: list           # ObstaclePredictions with horizon >= N
    weights: Weights
    footprint: object
    input_lb: np.ndarray
    input_ub: np.ndarray
    v_ref: object                # scalar or callable over theta arrays
    params: SolverParams = field(default_factory=SolverParams)
    warm: HorizonPlan = None
    tracking_point: np.ndarray = None   # point-tracking mode (no collision rows)

    def v_ref_at(self, thetas):
        if callable(self.v_ref):
            return np.asarray(self.v_ref(thetas), dtype=float)
        return np.full(np.shape(thetas), float(self.v_ref))


def error_vector(position, theta, ref: LocalReference):
    """Contour and lag error of a position against the blended reference."""
    p, phi = ref.evaluate(np.asarray(theta, dtype=float))
    sphi, cphi = np.sin(phi), np.cos(phi)
    d = np.asarray(position, dtype=float) - p
    return np.stack([sphi * d[..., 0] - cphi * d[..., 1],
                     -cphi * d[..., 0] - sphi * d[..., 1]], axis=-1)


def stage_cost(model, z, u, theta, ref: LocalReference, weights: Weights,
               v_ref: float, obstacle_positions=None, terminal: bool = False):
    """Tracking + speed + repulsive + input cost at one stage.

    The terminal stage drops the speed and input terms; `obstacle_positions`
    is an (n, 2) array of forecast centers at this step.
    """
    e = error_vector(np.asarray(z, dtype=float)[:2], theta, ref)
    j = float(e @ weights.q_eps @ e)
    if obstacle_positions is not None and len(obstacle_positions) > 0:
        d = np.asarray(z, dtype=float)[:2] - np.asarray(obstacle_positions, dtype=float)
        j += weights.q_r * float(np.sum(1.0 / (d[:, 0] ** 2 + d[:, 1] ** 2 + weights.gamma)))
    if not terminal:
        u = np.asarray(u, dtype=float)
        v = float(model.forward_speed(np.asarray(z, dtype=float), u))
        j += weights.q_v * (v_ref - v) ** 2
        j += float(u @ weights.q_u @ u)
    return j


class _Iterate:
    __slots__ = ("z", "theta", "u")

    def __init__(self, z, theta, u):
        self.z = np.asarray(z, dtype=float)
        self.theta = np.asarray(theta, dtype=float)
        self.u = np.asarray(u, dtype=float)

    def copy(self):
        return _Iterate(self.z.copy(), self.theta.copy(), self.u.copy())


def _rollout(snap, u) -> _Iterate:
    """Integrate inputs from the snapshot state; iterates stay defect-free."""
    from .dynamics import step_dynamics

    model, tau, n = snap.model, snap.tau, snap.n_steps
    z = np.empty((n + 1, model.nz))
    theta = np.empty(n + 1)
    z[0] = np.asarray(snap.state0, float)
    theta[0] = float(snap.theta0)
    for k in range(n):
        z[k + 1] = step_dynamics(model, z[k], u[k], tau)
        theta[k + 1] = theta[k] + tau * float(model.forward_speed(z[k], u[k]))
    return _Iterate(z, theta, u)


def _initial_iterate(snap: ProblemSnapshot) -> _Iterate:
    n = snap.n_steps
    if snap.warm is not None and snap.warm.inputs.shape == (n, 2):
        u = np.clip(snap.warm.inputs.copy(), snap.input_lb, snap.input_ub)
    else:
        u = np.clip(np.zeros((n, 2)), snap.input_lb, snap.input_ub)
    return _rollout(snap, u)


def _linearize_dynamics(snap, it):
    """Extended-state step Jacobians A, B along the iterate."""
    from .dynamics import step_with_jacobians

    model, tau, n = snap.model, snap.tau, snap.n_steps
    nz = model.nz
    nw = nz + 1
    _, a_z, b_z = step_with_jacobians(model, it.z[:-1], it.u, tau)
    a_ext = np.zeros((n, nw, nw))
    b_ext = np.zeros((n, nw, 2))
    a_ext[:, :nz, :nz] = a_z
    a_ext[:, nw - 1, nw - 1] = 1.0
    b_ext[:, :nz, :] = b_z
    v_state, v_input = model.speed_jacobian(nw)
    if v_state is not None:
        a_ext[:, nw - 1, v_state] = tau
    if v_input is not None:
        b_ext[:, nw - 1, v_input] = tau
    return a_ext, b_ext


def _disc_centers(snap, it):
    """Disc centers over steps 1..N, shape (N, n_c, 2), plus d(center)/d(psi)."""
    offs = snap.footprint.offsets
    pos = it.z[1:, :2]
    psi = it.z[1:, 2]
    c, s = np.cos(psi), np.sin(psi)
    rot = np.stack([np.stack([c, -s], axis=-1), np.stack([s, c], axis=-1)], axis=-2)
    centers = pos[:, None, :] + np.einsum("kij,cj->kci", rot, offs)
    drot = np.einsum("ij,kjl->kil", _ROT90, rot)
    dcenters = np.einsum("kij,cj->kci", drot, offs)
    return centers, dcenters


def _constraint_values(snap, it):
    """Static (N, 4, n_c) and dynamic (N, n_o, n_c) residuals for steps 1..N."""
    if snap.tracking_point is not None:
        return None, None
    n = snap.n_steps
    centers, _ = _disc_centers(snap, it)
    stat = None
    if snap.regions:
        stat = np.empty((n, 4, centers.shape[1]))
        for k, region in enumerate(snap.regions):
            stat[k] = region.offsets[:, None] - region.normals @ centers[k].T
    dyn = None
    if snap.predictions:
        dyn = np.empty((n, len(snap.predictions), centers.shape[1]))
        for i, pred in enumerate(snap.predictions):
            d = centers - pred.positions[1:n + 1, None, :]
            cp = np.cos(pred.psis[1:n + 1])[:, None]
            sp = np.sin(pred.psis[1:n + 1])[:, None]
            ux = cp * d[..., 0] + sp * d[..., 1]
            uy = -sp * d[..., 0] + cp * d[..., 1]
            dyn[:, i, :] = (ux / pred.alpha) ** 2 + (uy / pred.beta) ** 2
    return stat, dyn


def _violations(stat, dyn):
    v_sum, v_max = 0.0, 0.0
    if stat is not None:
        neg = np.maximum(-stat, 0.0)
        v_sum += float(neg.sum())
        v_max = max(v_max, float(neg.max(initial=0.0)))
    if dyn is not None:
        neg = np.maximum(1.0 - dyn, 0.0)
        v_sum += float(neg.sum())
        v_max = max(v_max, float(neg.max(initial=0.0)))
    return v_sum, v_max


def _objective(snap, it):
    """Full cost of the iterate: stage sums for k = 0..N-1 plus terminal."""
    w = snap.weights
    n = snap.n_steps
    j = float(np.einsum("ki,ij,kj->", it.u, w.q_u, it.u))
    if snap.tracking_point is not None:
        d = it.z[1:, :2] - snap.tracking_point[None, :]
        j += float(np.sum(d ** 2) * w.q_eps[0, 0])
        return j
    p, _, phi, _ = snap.ref.evaluate_full(it.theta)
    d = it.z[:, :2] - p
    sphi, cphi = np.sin(phi), np.cos(phi)
    e = np.stack([sphi * d[:, 0] - cphi * d[:, 1],
                  -cphi * d[:, 0] - sphi * d[:, 1]], axis=1)
    j += float(np.einsum("ki,ij,kj->", e, w.q_eps, e))
    v = snap.model.forward_speed(it.z[:-1], it.u)
    vref = snap.v_ref_at(it.theta[:-1])
    j += float(w.q_v * np.sum((vref - v) ** 2))
    if snap.predictions and w.q_r > 0.0:
        for pred in snap.predictions:
            dd = it.z[:, :2] - pred.positions[:n + 1]
            j += float(w.q_r * np.sum(1.0 / (dd[:, 0] ** 2 + dd[:, 1] ** 2 + w.gamma)))
    return j


def _merit(snap, it):
    """L1 merit: true cost plus the slack penalty on constraint violations.

    Iterates are produced by nonlinear rollouts, so dynamics defects are zero
    and the penalty only prices collision-constraint violations.
    """
    stat, dyn = _constraint_values(snap, it)
    v_sum, v_max = _violations(stat, dyn)
    j = _objective(snap, it)
    return j + snap.params.penalty * v_sum, j, v_max


def _condense(snap, a_ext, b_ext):
    n = snap.n_steps
    nw = snap.model.nz + 1
    e_mat = np.zeros((n + 1, nw, 2 * n))
    for k in range(n):
        e_mat[k + 1] = a_ext[k] @ e_mat[k]
        e_mat[k + 1][:, 2 * k:2 * k + 2] += b_ext[k]
    return e_mat


def _cost_rows(snap, it, e_mat):
    """Gauss-Newton residual rows in input space: J_U = J_w E_k per stage."""
    w = snap.weights
    n = snap.n_steps
    nw = snap.model.nz + 1
    nu_total = 2 * n
    rows, vals = [], []

    if snap.tracking_point is None:
        p, dp, phi, dphi = snap.ref.evaluate_full(it.theta)
        d = it.z[:, :2] - p
        sphi, cphi = np.sin(phi), np.cos(phi)
        e = np.stack([sphi * d[:, 0] - cphi * d[:, 1],
                      -cphi * d[:, 0] - sphi * d[:, 1]], axis=1)
        for k in range(1, n + 1):
            m_phi = np.array([[sphi[k], -cphi[k]], [-cphi[k], -sphi[k]]])
            dm_phi = np.array([[cphi[k], sphi[k]], [sphi[k], -cphi[k]]])
            jw = np.zeros((2, nw))
            jw[:, :2] = m_phi
            jw[:, nw - 1] = dphi[k] * (dm_phi @ d[k]) - m_phi @ dp[k]
            rows.append(w.l_eps @ jw @ e_mat[k])
            vals.append(w.l_eps @ e[k])

        sq_v = np.sqrt(w.q_v)
        if sq_v > 0.0:
            vref = snap.v_ref_at(it.theta[:-1])
            v = snap.model.forward_speed(it.z[:-1], it.u)
            v_state, v_input = snap.model.speed_jacobian(nw)
            for k in range(n):
                row = np.zeros((1, nu_total))
                if v_input is not None:
                    row[0, 2 * k + v_input] = -sq_v
                if v_state is not None:
                    jw = np.zeros(nw)
                    jw[v_state] = -sq_v
                    row[0] += jw @ e_mat[k]
                rows.append(row)
                vals.append(np.array([sq_v * (vref[k] - v[k])]))

        if snap.predictions and w.q_r > 0.0:
            sq_r = np.sqrt(w.q_r)
            for pred in snap.predictions:
                dd = it.z[1:, :2] - pred.positions[1:n + 1]
                s = dd[:, 0] ** 2 + dd[:, 1] ** 2 + w.gamma
                rho = sq_r / np.sqrt(s)
                grad = -sq_r * s[:, None] ** -1.5 * dd
                for k in range(1, n + 1):
                    jw = np.zeros((1, nw))
                    jw[0, :2] = grad[k - 1]
                    rows.append(jw @ e_mat[k])
                    vals.append(np.array([rho[k - 1]]))
    else:
        lt = np.sqrt(w.q_eps[0, 0])
        d = it.z[1:, :2] - snap.tracking_point[None, :]
        for k in range(1, n + 1):
            jw = np.zeros((2, nw))
            jw[0, 0] = lt
            jw[1, 1] = lt
            rows.append(jw @ e_mat[k])
            vals.append(lt * d[k - 1])

    for k in range(n):
        block = np.zeros((2, nu_total))
        block[:, 2 * k:2 * k + 2] = w.l_u
        rows.append(block)
        vals.append(w.l_u @ it.u[k])

    return np.concatenate(rows, axis=0), np.concatenate(vals, axis=0)


def _soft_rows(snap, it, e_mat):
    """Screened linearized constraint rows with identity keys.

    Returns (jacobian, value, margin, keys, curvatures): keys identify rows
    across SQP iterations so multiplier estimates can be reused; curvature
    entries carry (stage, hessian-in-position-space) for the quadratic
    obstacle rows (static rows are linear in position).
    """
    n = snap.n_steps
    if snap.tracking_point is not None:
        return np.zeros((0, 2 * n)), np.zeros(0), np.zeros(0), [], []
    nw = snap.model.nz + 1
    prm = snap.params
    centers, dcenters = _disc_centers(snap, it)
    n_c = centers.shape[1]
    jac_rows, values, margins, keys, curvs = [], [], [], [], []

    for k in range(1, n + 1):
        cen = centers[k - 1]
        dcen = dcenters[k - 1]
        if snap.regions:
            region = snap.regions[k - 1]
            res = region.offsets[:, None] - region.normals @ cen.T     # (4, n_c)
            for l in range(4):
                for j in range(n_c):
                    if res[l, j] >= prm.screen_static:
                        continue
                    jw = np.zeros(nw)
                    jw[:2] = -region.normals[l]
                    jw[2] = -region.normals[l] @ dcen[j]
                    jac_rows.append(jw @ e_mat[k])
                    values.append(res[l, j])
                    margins.append(0.0)
                    keys.append(("stat", k, l, j))
                    curvs.append(None)
        for i_o, pred in enumerate(snap.predictions):
            cp, sp = np.cos(pred.psis[k]), np.sin(pred.psis[k])
            r_o = np.array([[cp, -sp], [sp, cp]])
            m = r_o @ np.diag([pred.alpha ** -2.0, pred.beta ** -2.0]) @ r_o.T
            q = cen - pred.positions[k][None, :]
            res = np.einsum("ci,ij,cj->c", q, m, q)
            for j in range(n_c):
                if res[j] >= 1.0 + prm.screen_dynamic:
                    continue
                g = 2.0 * m @ q[j]
                jw = np.zeros(nw)
                jw[:2] = g
                jw[2] = g @ dcen[j]
                jac_rows.append(jw @ e_mat[k])
                values.append(res[j])
                margins.append(1.0)
                keys.append(("dyn", k, i_o, j))
                curvs.append((k, 2.0 * m))

    if not jac_rows:
        return np.zeros((0, 2 * n)), np.zeros(0), np.zeros(0), [], []
    return np.stack(jac_rows), np.array(values), np.array(margins), keys, curvs


def _solve_qp(snap, h_cost, g_cost, soft_jac, soft_val, soft_margin, u_flat):
    n = snap.n_steps
    nu_total = 2 * n
    n_soft = soft_jac.shape[0]
    prm = snap.params
    dim = nu_total + n_soft

    p_mat = np.zeros((dim, dim))
    p_mat[:nu_total, :nu_total] = h_cost + prm.reg * np.eye(nu_total)
    if n_soft:
        p_mat[nu_total:, nu_total:] = 1e-9 * np.eye(n_soft)
    q_vec = np.concatenate([g_cost, prm.penalty * np.ones(n_soft)])

    lb = np.tile(snap.input_lb, n)
    ub = np.tile(snap.input_ub, n)
    eye_u = np.eye(nu_total)
    rows = [np.concatenate([eye_u, np.zeros((nu_total, n_soft))], axis=1),
            np.concatenate([-eye_u, np.zeros((nu_total, n_soft))], axis=1)]
    rhs = [ub - u_flat, u_flat - lb]
    if n_soft:
        rows.append(np.concatenate([-soft_jac, -np.eye(n_soft)], axis=1))
        rhs.append(soft_val - soft_margin)
        rows.append(np.concatenate([np.zeros((n_soft, nu_total)), -np.eye(n_soft)], axis=1))
        rhs.append(np.zeros(n_soft))
    g_mat = np.concatenate(rows, axis=0)
    h_vec = np.concatenate(rhs)

    try:
        sol = cvxsolvers.qp(cvxmat(p_mat), cvxmat(q_vec), cvxmat(g_mat), cvxmat(h_vec))
    except (ValueError, ArithmeticError, ZeroDivisionError):
        return None, None
    if sol["x"] is None:
        return None, None
    x = np.array(sol["x"]).ravel()
    z = np.array(sol["z"]).ravel()
    duals = z[2 * nu_total:2 * nu_total + n_soft] if n_soft else np.zeros(0)
    return x[:nu_total], duals


def solve(snap: ProblemSnapshot, timer=time.perf_counter) -> HorizonPlan:
    """Run the SQP loop on one snapshot and return the best plan found.

    Status is `optimal` once the QP step, the constraint violations, and the
    shooting defects are all inside tolerance, `infeasible` when violations
    exceed the slack threshold at exit, and `max_iter` otherwise.
    """
    t_start = timer()
    prm = snap.params
    n = snap.n_steps
    it = _initial_iterate(snap)

    status = None
    iterations = 0
    kkt = float("inf")
    merit_prev, cost_val, viol_max = _merit(snap, it)
    lam_prev = {}

    for _ in range(prm.max_iterations):
        a_ext, b_ext = _linearize_dynamics(snap, it)
        e_mat = _condense(snap, a_ext, b_ext)
        jac, res = _cost_rows(snap, it, e_mat)
        soft_jac, soft_val, soft_margin, keys, curvs = _soft_rows(snap, it, e_mat)
        h_cost = 2.0 * jac.T @ jac
        # obstacle rows curve away from their tangent halfplanes; fold the
        # multiplier-weighted constraint curvature into the Hessian (clipped
        # back to PSD) so active-set iterates stop crawling along the boundary
        corrected = False
        for key, cv in zip(keys, curvs):
            if cv is None:
                continue
            lam = lam_prev.get(key, 0.0)
            if lam <= 1e-9:
                continue
            k_stage, m_pos = cv
            b_xy = e_mat[k_stage][:2, :]
            h_cost -= lam * b_xy.T @ m_pos @ b_xy
            corrected = True
        if corrected:
            w_eig, v_eig = np.linalg.eigh(h_cost)
            floor = 1e-5 * max(float(w_eig[-1]), 1.0)
            h_cost = (v_eig * np.maximum(w_eig, floor)) @ v_eig.T
        g_cost = 2.0 * jac.T @ res
        du, duals = _solve_qp(snap, h_cost, g_cost, soft_jac, soft_val,
                              soft_margin, it.u.ravel())
        iterations += 1
        if du is not None:
            lam_prev = {key: float(duals[i]) for i, key in enumerate(keys)}
        if du is None:
            status = "infeasible"
            break
        step_inf = float(np.max(np.abs(du), initial=0.0))

        if step_inf < prm.kkt_tol and viol_max <= prm.feas_tol:
            status = "optimal"
            kkt = max(step_inf, viol_max)
            break

        alpha = 1.0
        best = None
        accepted = False
        for _trial in range(prm.line_search_trials):
            u_cand = np.clip(it.u + alpha * du.reshape(n, 2),
                             snap.input_lb, snap.input_ub)
            cand = _rollout(snap, u_cand)
            merit_new, cost_new, v_new = _merit(snap, cand)
            if best is None or merit_new < best[0]:
                best = (merit_new, cand, cost_new, v_new, alpha)
            if merit_new < merit_prev - 1e-12:
                accepted = True
                break
            alpha *= prm.line_search_factor
        if not accepted and best is not None and best[0] < merit_prev + 1e-12:
            accepted = True
        if not accepted:
            kkt = max(step_inf, viol_max)
            break
        merit_prev, it, cost_val, viol_max, alpha_used = best
        kkt = max(alpha_used * step_inf, viol_max)
        if alpha_used == 1.0 and step_inf < prm.kkt_tol and viol_max <= prm.feas_tol:
            status = "optimal"
            break

    if status is None:
        status = "infeasible" if viol_max > prm.infeasible_slack else "max_iter"

    return HorizonPlan(
        states=it.z, inputs=it.u, thetas=it.theta, cost=cost_val,
        status=status, solve_time=timer() - t_start, iterations=iterations,
        kkt_residual=kkt, slack_max=viol_max,
    )
