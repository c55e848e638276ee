"""Projected gradient descent over waypoint matrices, multi-start.

Free variables are every waypoint's positions and velocities except the
start (times stay fixed and uniform). Gradients are central finite
differences; perturbing one waypoint only changes its two adjacent
Hermite segments, so the gradient re-evaluates just those segments, for
every perturbation of every restart in one batched kernel call.
Restarts are optimized in lockstep on shared read-only problem data.
Each accepted step passes an Armijo backtracking test and is projected
onto the joint limits, so accepted costs never increase.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import PlanningFailure
from ..kinematics import batch_penetrations, capsule_world_segments
from ..mapping import CostTerm, PlanningProblem
from .costs import DEFAULT_SAMPLES, CostBreakdown, SegmentKernel, kernel_for, total_cost
from .trajectory import Trajectory, segment_eval, segment_extrema_ok


@dataclass(frozen=True)
class OptimizeOptions:
    max_iter: int = 300
    grad_tol: float = 1e-4  # projected-gradient infinity norm
    cost_tol: float = 1e-8  # accepted-cost decrease
    stall_window: int = 15  # stop when this many steps barely improve
    stall_tol: float = 5e-5
    fd_step: float = 1e-5
    armijo_c1: float = 1e-4
    backtrack: float = 0.5
    alpha0: float = 1.0
    step_cap: float = 0.5  # radians; bounds steps along flat directions
    min_alpha: float = 1e-12
    samples: int = DEFAULT_SAMPLES


@dataclass
class OptimizeResult:
    trajectory: Trajectory
    breakdown: CostBreakdown
    iterations: int
    cost_trace: list[float]
    converged: bool
    no_progress: bool = False


def _uniform_times(problem: PlanningProblem) -> np.ndarray:
    return np.linspace(0.0, problem.horizon, problem.n_waypoints)


class _Batch:
    """Lockstep state for a batch of restarts."""

    def __init__(self, problem: PlanningProblem, Q, dQ, times, opts: OptimizeOptions):
        self.problem = problem
        self.arm = problem.arm
        self.kern = kernel_for(problem, opts.samples)
        self.opts = opts
        self.Q = np.array(Q, dtype=float)  # (B, W, dof)
        self.dQ = np.array(dQ, dtype=float)
        self.times = np.asarray(times, dtype=float)
        self.h = np.diff(self.times)
        B, W, dof = self.Q.shape
        self.B, self.W, self.dof = B, W, dof
        # free-variable index tables: waypoints 1..W-1, (q, dq), joints
        j = np.repeat(np.arange(1, W), 2 * dof)
        flag = np.tile(np.repeat([0, 1], dof), W - 1)
        k = np.tile(np.arange(dof), 2 * (W - 1))
        self.j_idx, self.flag, self.k_idx = j, flag, k
        self.F = len(j)
        self.delta_q = np.zeros((self.F, dof))
        self.delta_dq = np.zeros((self.F, dof))
        rows = np.arange(self.F)
        self.delta_q[rows[flag == 0], k[flag == 0]] = opts.fd_step
        self.delta_dq[rows[flag == 1], k[flag == 1]] = opts.fd_step
        self.alpha = np.full(B, opts.alpha0)
        self.active = np.ones(B, dtype=bool)
        self.no_progress = np.zeros(B, dtype=bool)
        self.iterations = np.zeros(B, dtype=int)
        self.seg_costs = self._segment_totals(self.Q, self.dQ)
        self.costs = self.seg_costs.sum(axis=1)
        self.traces = [[c] for c in self.costs]

    def _segment_totals(self, Q, dQ):
        return self.kern.weighted_total(Q[:, :-1], dQ[:, :-1], Q[:, 1:], dQ[:, 1:], self.h)

    def _total(self, Q, dQ):
        return self._segment_totals(Q, dQ).sum(axis=1)

    def gradient(self, idx):
        """Central-difference gradient plus diagonal curvature.

        Perturbing one waypoint touches only its two adjacent segments,
        so each probe re-evaluates just those. The same probes give the
        second difference along every coordinate for free; it is used
        to precondition the step. Returns (gq, gdq, cq, cdq) shaped
        (n, W-1, dof) over waypoints 1..W-1.
        """
        Q, dQ = self.Q[idx], self.dQ[idx]
        seg = self.seg_costs[idx]
        n = Q.shape[0]
        j, F = self.j_idx, self.F
        sign = np.array([1.0, -1.0])
        pq = Q[:, j][:, :, None, :] + sign[None, None, :, None] * self.delta_q[None, :, None, :]
        pdq = dQ[:, j][:, :, None, :] + sign[None, None, :, None] * self.delta_dq[None, :, None, :]
        # left segment (j-1, j)
        q0 = np.broadcast_to(Q[:, j - 1][:, :, None, :], pq.shape)
        dq0 = np.broadcast_to(dQ[:, j - 1][:, :, None, :], pq.shape)
        hA = np.broadcast_to(self.h[j - 1][:, None], (F, 2))
        costA = self.kern.weighted_total(q0, dq0, pq, pdq, hA)
        # right segment (j, j+1) where it exists
        maskB = j <= self.W - 2
        j_next = np.minimum(j + 1, self.W - 1)
        q1 = np.broadcast_to(Q[:, j_next][:, :, None, :], pq.shape)
        dq1 = np.broadcast_to(dQ[:, j_next][:, :, None, :], pq.shape)
        hB = np.broadcast_to(self.h[np.minimum(j, self.W - 2)][:, None], (F, 2))
        costB = self.kern.weighted_total(pq, pdq, q1, dq1, hB) * maskB[None, :, None]

        base_total = seg.sum(axis=1)
        base_left = seg[:, j - 1]
        base_right = seg[:, np.minimum(j, self.W - 2)] * maskB[None, :]
        totals = (
            base_total[:, None, None]
            - base_left[:, :, None]
            - base_right[:, :, None]
            + costA
            + costB
        )
        h = self.opts.fd_step
        grad = (totals[:, :, 0] - totals[:, :, 1]) / (2.0 * h)
        curv = (totals[:, :, 0] + totals[:, :, 1] - 2.0 * base_total[:, None]) / (h * h)
        grad = grad.reshape(n, self.W - 1, 2, self.dof)
        curv = curv.reshape(n, self.W - 1, 2, self.dof)
        return grad[:, :, 0, :], grad[:, :, 1, :], curv[:, :, 0, :], curv[:, :, 1, :]

    def project(self, Q, dQ):
        arm = self.arm
        Qp = np.clip(Q, arm.q_min, arm.q_max)
        dQp = np.clip(dQ, arm.dq_min, arm.dq_max)
        Qp[:, 0], dQp[:, 0] = Q[:, 0], dQ[:, 0]  # start is pinned
        return Qp, dQp

    def step(self) -> bool:
        """One projected-gradient iteration; returns False when all done."""
        idx = np.flatnonzero(self.active)
        if idx.size == 0:
            return False
        gq, gdq, cq, cdq = self.gradient(idx)
        # projected-gradient residual for convergence
        Qtry = self.Q[idx].copy()
        dQtry = self.dQ[idx].copy()
        Qtry[:, 1:] -= gq
        dQtry[:, 1:] -= gdq
        Qtry, dQtry = self.project(Qtry, dQtry)
        resid = np.maximum(
            np.max(np.abs(Qtry[:, 1:] - self.Q[idx][:, 1:]), axis=(1, 2)),
            np.max(np.abs(dQtry[:, 1:] - self.dQ[idx][:, 1:]), axis=(1, 2)),
        )
        done_grad = resid < self.opts.grad_tol
        self.active[idx[done_grad]] = False
        idx = idx[~done_grad]
        if idx.size == 0:
            return np.any(self.active)
        gq, gdq = gq[~done_grad], gdq[~done_grad]
        cq, cdq = cq[~done_grad], cdq[~done_grad]

        # diagonal-Newton direction with a per-coordinate trust region:
        # Newton where curvature is positive and informative, a capped
        # gradient step elsewhere; positive diagonal keeps it a descent
        # direction regardless
        cap = self.opts.step_cap
        dq_dir = gq / np.maximum(np.maximum(cq, 0.0), np.maximum(np.abs(gq) / cap, 1e-10))
        ddq_dir = gdq / np.maximum(np.maximum(cdq, 0.0), np.maximum(np.abs(gdq) / cap, 1e-10))

        alpha = self.alpha[idx].copy()
        remaining = np.ones(len(idx), dtype=bool)
        f0 = self.costs[idx]
        while np.any(remaining):
            rsel = np.flatnonzero(remaining)
            gsel = idx[rsel]
            Qn = self.Q[gsel].copy()
            dQn = self.dQ[gsel].copy()
            Qn[:, 1:] -= alpha[rsel, None, None] * dq_dir[rsel]
            dQn[:, 1:] -= alpha[rsel, None, None] * ddq_dir[rsel]
            Qn, dQn = self.project(Qn, dQn)
            seg_new = self._segment_totals(Qn, dQn)
            f_new = seg_new.sum(axis=1)
            descent = np.einsum("nwd,nwd->n", gq[rsel], self.Q[gsel][:, 1:] - Qn[:, 1:]) + np.einsum(
                "nwd,nwd->n", gdq[rsel], self.dQ[gsel][:, 1:] - dQn[:, 1:]
            )
            accept = f_new <= f0[rsel] - self.opts.armijo_c1 * descent
            acc_global = gsel[accept]
            if acc_global.size:
                a_loc = rsel[accept]
                self.Q[acc_global] = Qn[accept]
                self.dQ[acc_global] = dQn[accept]
                self.seg_costs[acc_global] = seg_new[accept]
                delta = self.costs[acc_global] - f_new[accept]
                self.costs[acc_global] = f_new[accept]
                self.alpha[acc_global] = np.minimum(alpha[a_loc] * 2.0, self.opts.alpha0)
                for g, c, d in zip(acc_global, f_new[accept], delta):
                    self.traces[g].append(float(c))
                    self.iterations[g] += 1
                    w = self.opts.stall_window
                    stalled = (
                        self.iterations[g] >= w
                        and self.traces[g][-w - 1] - self.traces[g][-1] < self.opts.stall_tol
                    )
                    if d < self.opts.cost_tol or stalled or self.iterations[g] >= self.opts.max_iter:
                        self.active[g] = False
                remaining[rsel[accept]] = False
            alpha[rsel[~accept]] *= self.opts.backtrack
            stuck = remaining & (alpha < self.opts.min_alpha)
            if np.any(stuck):
                gstuck = idx[np.flatnonzero(stuck)]
                self.active[gstuck] = False
                self.no_progress[gstuck] = True
                remaining[stuck] = False
        return bool(np.any(self.active))


def optimize_batch(problem: PlanningProblem, Q, dQ, opts: OptimizeOptions | None = None):
    opts = opts or OptimizeOptions()
    times = _uniform_times(problem)
    batch = _Batch(problem, Q, dQ, times, opts)
    while batch.step():
        pass
    return batch


def _init_arrays(problem: PlanningProblem, init: Trajectory):
    arm = problem.arm
    q = np.clip(init.q, arm.q_min, arm.q_max)
    dq = np.clip(init.dq, arm.dq_min, arm.dq_max)
    q[0] = init.q[0]
    dq[0] = init.dq[0]
    return q, dq


def optimize(problem: PlanningProblem, init: Trajectory, opts: OptimizeOptions | None = None) -> OptimizeResult:
    """Minimize the weighted cost from one initialization.

    The first waypoint and the knot times never move; every other
    waypoint position and velocity is free, projected onto the joint
    limits after each step. Accepted cost is non-increasing; if no step
    passes the line search the best-so-far comes back flagged.
    """
    opts = opts or OptimizeOptions()
    q, dq = _init_arrays(problem, init)
    batch = optimize_batch(problem, q[None], dq[None], opts)
    traj = Trajectory(q=batch.Q[0], dq=batch.dQ[0], times=batch.times)
    return OptimizeResult(
        trajectory=traj,
        breakdown=total_cost(problem, traj, samples=opts.samples),
        iterations=int(batch.iterations[0]),
        cost_trace=batch.traces[0],
        converged=not batch.no_progress[0],
        no_progress=bool(batch.no_progress[0]),
    )


def _goal_score(arm, obstacles, Q, target):
    from ..kinematics import ee_position_batch

    d = np.linalg.norm(ee_position_batch(arm, Q) - target, axis=-1)
    if obstacles:
        P0, P1, radii = capsule_world_segments(arm, Q)
        pen = batch_penetrations(P0, P1, radii, obstacles).max(axis=(-1, -2))
        return d + 50.0 * pen
    return d


def _refine_goals(problem: PlanningProblem, goals, iters: int = 60, step0: float = 0.2):
    """Descend each goal config toward the target, collision penalized.

    Plain batched finite-difference descent on a static score (distance
    to the position target plus penetration penalty); random samples
    alone almost never land a tight grasp pose, refined ones do.
    """
    arm = problem.arm
    obstacles = problem.obstacles
    target = problem.terms_of("position")[0].param("target")
    Q = np.array(goals, dtype=float)
    K, dof = Q.shape
    alpha = np.full(K, step0)
    score = _goal_score(arm, obstacles, Q, target)
    h = 1e-4
    eye = np.eye(dof) * h
    for _ in range(iters):
        P = Q[:, None, None, :] + np.array([1.0, -1.0])[None, :, None, None] * eye[None, None, :, :]
        s = _goal_score(arm, obstacles, P.reshape(-1, dof), target).reshape(K, 2, dof)
        g = (s[:, 0] - s[:, 1]) / (2 * h)
        gn = np.maximum(np.max(np.abs(g), axis=1, keepdims=True), 1e-12)
        for _ in range(12):
            Qn = np.clip(Q - alpha[:, None] * g / gn, arm.q_min, arm.q_max)
            sn = _goal_score(arm, obstacles, Qn, target)
            better = sn < score
            Q[better] = Qn[better]
            score[better] = sn[better]
            alpha[better] = np.minimum(alpha[better] * 1.5, step0)
            alpha[~better] *= 0.5
            if np.all(better):
                break
        if np.all(alpha < 1e-6):
            break
    return Q, score


def _goal_seeds(problem: PlanningProblem, rng, count: int, n_scored: int = 256):
    """Goal configurations for straight-line initializations.

    Random joint-space samples are scored by end-effector distance to
    the position target with a penetration penalty, then the best ones
    are refined by a short static descent so the line targets end at
    defensible grasp poses.
    """
    arm = problem.arm
    start_q = problem.start.joint_angles
    pos_terms = problem.terms_of("position")
    samples = rng.uniform(arm.q_min, arm.q_max, size=(n_scored, arm.dof))
    if not pos_terms:
        return np.tile(start_q, (count, 1))
    target = pos_terms[0].param("target")
    cand = np.vstack([samples, start_q[None]])
    d = _goal_score(arm, problem.obstacles, cand, target)
    order = np.argsort(d, kind="stable")
    top = cand[order[: max(2 * count, 8)]]
    refined, scores = _refine_goals(problem, top)
    order2 = np.argsort(scores, kind="stable")
    picks = [refined[i] for i in order2[:count]]
    while len(picks) < count:
        picks.append(refined[order2[0]])
    return np.array(picks)


def _line_init(problem: PlanningProblem, goal_q, jitter=None):
    W = problem.n_waypoints
    arm = problem.arm
    start_q = problem.start.joint_angles
    start_dq = problem.start.joint_velocities
    alphas = np.linspace(0.0, 1.0, W)[:, None]
    Q = (1 - alphas) * start_q[None] + alphas * np.asarray(goal_q)[None]
    dQ = np.tile((np.asarray(goal_q) - start_q)[None] / problem.horizon, (W, 1))
    dQ[0] = start_dq
    dQ[-1] = 0.0
    if jitter is not None:
        Q[1:-1] += jitter
    Q = np.clip(Q, arm.q_min, arm.q_max)
    dQ = np.clip(dQ, arm.dq_min, arm.dq_max)
    Q[0], dQ[0] = start_q, start_dq
    return Q, dQ


def canonical_init(problem: PlanningProblem, seed: int = 0) -> Trajectory:
    """The deterministic first initialization `plan` optimizes."""
    rng = np.random.default_rng(seed)
    goal = _goal_seeds(problem, rng, 1)[0]
    Q, dQ = _line_init(problem, goal)
    return Trajectory(q=Q, dq=dQ, times=_uniform_times(problem))


def sampled_max_penetration(problem: PlanningProblem, traj: Trajectory, samples: int = DEFAULT_SAMPLES, margin: float = 0.0) -> float:
    """Largest sampled penetration depth; `margin=0` is true overlap.

    Costs penalize the safety band around obstacles, but "in collision"
    for the escalation loop and for reported feasibility means actual
    geometric overlap; the band is the buffer that lets the loop
    terminate."""
    obstacles = problem.obstacles
    if not obstacles:
        return 0.0
    u = np.linspace(0.0, 1.0, samples + 1)
    qs, _ = segment_eval(traj.q[:-1], traj.dq[:-1], traj.q[1:], traj.dq[1:], np.diff(traj.times), u)
    P0, P1, radii = capsule_world_segments(problem.arm, qs)
    pens = batch_penetrations(P0, P1, radii, obstacles, margin=margin)
    return float(pens.max())


def _scale_violating_derivatives(problem: PlanningProblem, Q, dQ, times, rounds=20):
    """Shrink segment-end velocities until interpolated extrema respect
    the joint bounds everywhere, leaving the start untouched."""
    arm = problem.arm
    h = np.diff(times)
    for _ in range(rounds):
        ok = segment_extrema_ok(Q[:-1], dQ[:-1], Q[1:], dQ[1:], h, arm.q_min, arm.q_max)
        if np.all(ok):
            return Q, dQ
        for s in np.flatnonzero(~ok):
            if s > 0:
                dQ[s] *= 0.8
            dQ[s + 1] *= 0.8
    return Q, dQ


@dataclass
class PlanResult:
    trajectory: Trajectory
    breakdown: CostBreakdown
    iterations: int
    escalations: int
    restart_costs: list[float]
    cost_trace: list[float]


def _with_collision_weight(problem: PlanningProblem, factor: float) -> PlanningProblem:
    terms = tuple(
        CostTerm(kind=t.kind, weight=t.weight * factor, params=t.params) if t.kind == "collision" else t
        for t in problem.terms
    )
    return replace(problem, terms=terms)


def plan(problem: PlanningProblem, restarts: int = 8, seed: int = 0, opts: OptimizeOptions | None = None, max_escalations: int = 5) -> PlanResult:
    """Multi-start optimization with collision-weight escalation.

    Straight-line initializations toward ranked random goal seeds (the
    first one unjittered and deterministic under the seed), optimized
    in lockstep; the cheapest collision-free result wins. While the
    best trajectory still penetrates anywhere along its samples, the
    collision weight doubles and optimization resumes, up to
    `max_escalations` times.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    opts = opts or OptimizeOptions()
    rng = np.random.default_rng(seed)

    def fresh_inits(prob, sigma=0.25):
        goals = _goal_seeds(prob, rng, restarts)
        inits_Q, inits_dQ = [], []
        for r in range(restarts):
            jitter = None if r == 0 else rng.normal(0.0, sigma, size=(prob.n_waypoints - 2, prob.arm.dof))
            Qr, dQr = _line_init(prob, goals[r], jitter)
            inits_Q.append(Qr)
            inits_dQ.append(dQr)
        return np.array(inits_Q), np.array(inits_dQ)

    polish_count = min(3, restarts)
    explore_iters = 60

    def run_round(prob, Q, dQ):
        """Short exploration on every restart, full polish on the best."""
        if restarts > polish_count:
            b1 = optimize_batch(prob, Q, dQ, replace(opts, max_iter=explore_iters))
            pens1 = np.array(
                [sampled_max_penetration(prob, Trajectory(q=b1.Q[b], dq=b1.dQ[b], times=b1.times), samples=opts.samples) for b in range(restarts)]
            )
            top = np.argsort(b1.costs + 1e3 * pens1, kind="stable")[:polish_count]
            b2 = optimize_batch(prob, b1.Q[top], b1.dQ[top], opts)
            traces = [b1.traces[t] + b2.traces[k][1:] for k, t in enumerate(top)]
            return b2, traces
        b2 = optimize_batch(prob, Q, dQ, opts)
        return b2, b2.traces

    current = problem
    escalations = 0
    Q, dQ = fresh_inits(current)
    while True:
        batch, traces = run_round(current, Q, dQ)
        times = batch.times
        n_polished = batch.Q.shape[0]
        trajs = [Trajectory(q=batch.Q[b], dq=batch.dQ[b], times=times) for b in range(n_polished)]
        pens = np.array([sampled_max_penetration(current, t, samples=opts.samples) for t in trajs])
        costs = batch.costs
        feasible = pens <= 0.0
        if np.any(feasible):
            order = np.flatnonzero(feasible)
            b = int(order[np.argmin(costs[order])])
            qf, dqf = _scale_violating_derivatives(current, batch.Q[b].copy(), batch.dQ[b].copy(), times)
            traj = Trajectory(q=qf, dq=dqf, times=times)
            if sampled_max_penetration(current, traj, samples=opts.samples) <= 0.0:
                return PlanResult(
                    trajectory=traj,
                    breakdown=total_cost(problem, traj, samples=opts.samples),
                    iterations=int(batch.iterations[b]),
                    escalations=escalations,
                    restart_costs=[float(c) for c in costs],
                    cost_trace=traces[b],
                )
        if escalations >= max_escalations:
            raise PlanningFailure(
                f"still in collision after {escalations} collision-weight escalations "
                f"(min sampled penetration {pens.min():.4f} m)"
            )
        escalations += 1
        current = _with_collision_weight(current, 2.0)
        Q, dQ = fresh_inits(current, sigma=0.25 * (1.4 ** escalations))
