"""Cost terms over Hermite trajectories.

All sampled terms run through one batched segment kernel: sample the
segment, run forward kinematics once, then form each term's integrand
and integrate with the composite trapezoid rule (default 10
subintervals per segment). Smoothness integrates in closed form. The
kernel evaluates arbitrary batches of segments at once, which is what
makes finite-difference gradients affordable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import quat_angle, vector_angle
from ..kinematics import ArmModel, DEFAULT_MARGIN, batch_penetrations, fk_batch
from ..mapping import CostTerm, PlanningProblem
from ..world import Environment
from .trajectory import Trajectory, segment_eval, smoothness_closed_form

DEFAULT_SAMPLES = 10  # trapezoid subintervals per segment


@dataclass
class CostBreakdown:
    kinds: list[str]
    raw: np.ndarray
    weighted: np.ndarray
    total: float
    limits_ok: bool = True

    def by_kind(self, kind: str) -> float:
        return float(sum(w for k, w in zip(self.kinds, self.weighted) if k == kind))

    def raw_by_kind(self, kind: str) -> float:
        return float(sum(r for k, r in zip(self.kinds, self.raw) if k == kind))

    def to_dict(self) -> dict:
        return {
            "terms": [
                {"kind": k, "raw": float(r), "weighted": float(w)}
                for k, r, w in zip(self.kinds, self.raw, self.weighted)
            ],
            "total": self.total,
            "limits_ok": self.limits_ok,
        }


def _capsules_from_fk(arm: ArmModel, quats, positions):
    from ..geometry import transform_apply

    n_caps = len(arm.capsules)
    batch = quats.shape[:-2]
    P0 = np.empty(batch + (n_caps, 3))
    P1 = np.empty(batch + (n_caps, 3))
    for k, cap in enumerate(arm.capsules):
        ql = quats[..., cap.link, :]
        tl = positions[..., cap.link, :]
        P0[..., k, :] = transform_apply(ql, tl, cap.p0)
        P1[..., k, :] = transform_apply(ql, tl, cap.p1)
    return P0, P1, np.array([c.radius for c in arm.capsules])


class SegmentKernel:
    """Evaluates cost terms over batches of Hermite segments.

    Dispatches to the compiled kernel when numba is available; the
    vectorized numpy path below is the reference implementation and the
    two agree to machine precision (covered by the test suite).
    """

    def __init__(self, arm: ArmModel, obstacles, terms, samples: int = DEFAULT_SAMPLES, margin: float = DEFAULT_MARGIN, compiled: bool | None = None):
        from . import nbkernels

        self.arm = arm
        self.obstacles = tuple(obstacles)
        self.terms = tuple(terms)
        self.samples = samples
        self.margin = margin
        self.u = np.linspace(0.0, 1.0, samples + 1)
        tw = np.ones(samples + 1)
        tw[0] = tw[-1] = 0.5
        self.trap_w = tw / samples
        self.needs_fk = any(t.kind != "smoothness" for t in self.terms)
        self.needs_vel = any(t.kind == "speed" for t in self.terms)
        self.needs_caps = any(t.kind == "collision" for t in self.terms)
        self.compiled = nbkernels.HAVE_NUMBA if compiled is None else compiled
        if self.compiled:
            from .trajectory import hermite_bases

            self._basis, self._dbasis = hermite_bases(self.u)
            self._packed_terms = nbkernels.pack_terms(self.terms)
            self._packed_arm = nbkernels.pack_arm(arm)
            self._packed_obs = nbkernels.pack_obstacles(self.obstacles)

    def _term_costs_compiled(self, q0, dq0, q1, dq1, h_seg):
        from . import nbkernels
        from ..kinematics import GOLDEN_ITERS

        q0 = np.asarray(q0, dtype=float)
        batch = q0.shape[:-1]
        dof = q0.shape[-1]
        hb = np.broadcast_to(np.asarray(h_seg, dtype=float), batch)
        flat = lambda a: np.ascontiguousarray(np.broadcast_to(np.asarray(a, dtype=float), batch + (dof,)).reshape(-1, dof))  # noqa: E731
        out = nbkernels.segment_costs_nb(
            flat(q0), flat(dq0), flat(q1), flat(dq1),
            np.ascontiguousarray(hb.reshape(-1)),
            self._basis, self._dbasis, self.trap_w,
            *self._packed_arm,
            *self._packed_obs,
            self._packed_terms,
            float(self.margin), GOLDEN_ITERS,
        )
        return out.reshape(batch + (len(self.terms),))

    def term_costs(self, q0, dq0, q1, dq1, h_seg):
        """Per-term integrals for each segment row; shapes (..., n_terms)."""
        if self.compiled:
            return self._term_costs_compiled(q0, dq0, q1, dq1, h_seg)
        h_seg = np.asarray(h_seg, dtype=float)
        batch = np.asarray(q0).shape[:-1]
        out = np.zeros(batch + (len(self.terms),))
        if self.needs_fk:
            from ..kinematics import ee_from_fk, ee_quat_from_fk

            qs, dqs = segment_eval(q0, dq0, q1, dq1, h_seg, self.u)  # (..., S+1, dof)
            quats, positions, origins, axes = fk_batch(self.arm, qs)
            p_ee = ee_from_fk(self.arm, quats, positions)
            q_ee = ee_quat_from_fk(self.arm, quats)
            weights = h_seg[..., None] * self.trap_w  # (..., S+1)
            if self.needs_caps:
                P0, P1, radii = _capsules_from_fk(self.arm, quats, positions)
            if self.needs_vel:
                arms_to_ee = p_ee[..., None, :] - origins
                v_ee = np.sum(np.cross(axes, arms_to_ee) * dqs[..., :, None], axis=-2)
        for i, t in enumerate(self.terms):
            if t.kind == "smoothness":
                out[..., i] = smoothness_closed_form(q0, dq0, q1, dq1, h_seg)
                continue
            if t.kind == "collision":
                pens = batch_penetrations(P0, P1, radii, self.obstacles, margin=self.margin)
                integrand = np.sum(pens * pens, axis=(-1, -2))
            elif t.kind == "position":
                d = p_ee - t.param("target")
                integrand = np.sum(d * d, axis=-1)
            elif t.kind == "orientation":
                integrand = quat_angle(q_ee, t.param("target")) ** 2
            elif t.kind == "upvector":
                up = _up_from_quat(q_ee)
                integrand = vector_angle(up, t.param("target")) ** 2
            elif t.kind == "speed":
                d = v_ee - t.param("target")
                integrand = np.sum(d * d, axis=-1)
            elif t.kind == "repulsion":
                d = np.linalg.norm(p_ee - t.param("source"), axis=-1)
                integrand = np.exp(-t.param("c") * d)
            else:
                raise ValueError(f"unknown term kind {t.kind}")
            out[..., i] = np.sum(integrand * weights, axis=-1)
        return out

    def weighted_total(self, q0, dq0, q1, dq1, h_seg):
        costs = self.term_costs(q0, dq0, q1, dq1, h_seg)
        w = np.array([t.weight for t in self.terms])
        return costs @ w

    def trajectory_term_costs(self, Q, dQ, times):
        """Per-term totals over whole trajectories; Q: (..., W, dof)."""
        h = np.diff(times)
        costs = self.term_costs(Q[..., :-1, :], dQ[..., :-1, :], Q[..., 1:, :], dQ[..., 1:, :], h)
        return costs.sum(axis=-2)


def _up_from_quat(q):
    from ..geometry import quat_rotate

    z = np.array([0.0, 0.0, 1.0])
    return quat_rotate(q, z)


def kernel_for(problem: PlanningProblem, samples: int = DEFAULT_SAMPLES) -> SegmentKernel:
    return SegmentKernel(problem.arm, problem.obstacles, problem.terms, samples=samples)


def total_cost(problem: PlanningProblem, traj: Trajectory, samples: int = DEFAULT_SAMPLES) -> CostBreakdown:
    """Weighted sum of the active terms; limit feasibility reported
    separately rather than folded into the objective."""
    kern = kernel_for(problem, samples)
    raw = kern.trajectory_term_costs(traj.q, traj.dq, traj.times)
    w = np.array([t.weight for t in problem.terms])
    weighted = raw * w
    arm = problem.arm
    limits_ok = bool(
        np.all(traj.q >= arm.q_min - 1e-9) and np.all(traj.q <= arm.q_max + 1e-9)
        and np.all(traj.dq >= arm.dq_min - 1e-9) and np.all(traj.dq <= arm.dq_max + 1e-9)
    )
    return CostBreakdown(
        kinds=[t.kind for t in problem.terms],
        raw=raw,
        weighted=weighted,
        total=float(weighted.sum()),
        limits_ok=limits_ok,
    )


def _single_term_cost(traj: Trajectory, arm: ArmModel, term: CostTerm, obstacles=(), samples=DEFAULT_SAMPLES, margin=DEFAULT_MARGIN) -> float:
    kern = SegmentKernel(arm, obstacles, (term,), samples=samples, margin=margin)
    return float(kern.trajectory_term_costs(traj.q, traj.dq, traj.times)[0])


def cost_collision(traj: Trajectory, env: Environment, arm: ArmModel, margin: float = DEFAULT_MARGIN, samples: int = DEFAULT_SAMPLES, obstacles=None) -> float:
    obs = env.obstacles if obstacles is None else tuple(obstacles)
    return _single_term_cost(traj, arm, CostTerm.make("collision", 1.0), obstacles=obs, samples=samples, margin=margin)


def cost_smoothness(traj: Trajectory) -> float:
    from .trajectory import trajectory_smoothness

    return trajectory_smoothness(traj)


def cost_position(traj: Trajectory, p_target, arm: ArmModel, samples: int = DEFAULT_SAMPLES) -> float:
    return _single_term_cost(traj, arm, CostTerm.make("position", 1.0, target=p_target), samples=samples)


def cost_orientation(traj: Trajectory, q_target, arm: ArmModel, samples: int = DEFAULT_SAMPLES) -> float:
    return _single_term_cost(traj, arm, CostTerm.make("orientation", 1.0, target=q_target), samples=samples)


def cost_upvector(traj: Trajectory, n_target, arm: ArmModel, samples: int = DEFAULT_SAMPLES) -> float:
    return _single_term_cost(traj, arm, CostTerm.make("upvector", 1.0, target=n_target), samples=samples)


def cost_speed(traj: Trajectory, v_target, arm: ArmModel, samples: int = DEFAULT_SAMPLES) -> float:
    return _single_term_cost(traj, arm, CostTerm.make("speed", 1.0, target=v_target), samples=samples)


def cost_repulsion(traj: Trajectory, p_r, c: float, arm: ArmModel, samples: int = DEFAULT_SAMPLES) -> float:
    return _single_term_cost(traj, arm, CostTerm.make("repulsion", 1.0, source=p_r, c=c), samples=samples)
