"""Waypoint trajectories with cubic Hermite interpolation.

A trajectory stores joint positions, joint velocities, and times per
waypoint; between waypoints each joint follows the cubic Hermite
segment defined by the endpoint positions and velocities, so knots are
interpolated exactly in both value and derivative.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import OutOfRange


@dataclass(frozen=True)
class Trajectory:
    q: np.ndarray  # (W, dof)
    dq: np.ndarray  # (W, dof)
    times: np.ndarray  # (W,), times[0] == 0, strictly increasing

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        dq = np.asarray(self.dq, dtype=float)
        t = np.asarray(self.times, dtype=float)
        if q.shape != dq.shape or q.ndim != 2 or t.shape != (q.shape[0],):
            raise ValueError("inconsistent trajectory shapes")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must start at 0 and increase strictly")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(dq))):
            raise ValueError("trajectory values must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "dq", dq)
        object.__setattr__(self, "times", t)

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @property
    def n_waypoints(self) -> int:
        return self.q.shape[0]

    @property
    def dof(self) -> int:
        return self.q.shape[1]

    def to_dict(self) -> dict:
        return {
            "waypoints": [
                {"q": list(map(float, self.q[i])), "dq": list(map(float, self.dq[i])), "t": float(self.times[i])}
                for i in range(self.n_waypoints)
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Trajectory":
        wps = data["waypoints"]
        return cls(
            q=np.array([w["q"] for w in wps]),
            dq=np.array([w["dq"] for w in wps]),
            times=np.array([w["t"] for w in wps]),
        )


def hermite_bases(u):
    """Position and velocity basis values at normalized parameters u."""
    u = np.asarray(u, dtype=float)
    u2, u3 = u * u, u * u * u
    h = np.stack([2 * u3 - 3 * u2 + 1, u3 - 2 * u2 + u, -2 * u3 + 3 * u2, u3 - u2], axis=-1)
    hd = np.stack([6 * u2 - 6 * u, 3 * u2 - 4 * u + 1, -6 * u2 + 6 * u, 3 * u2 - 2 * u], axis=-1)
    return h, hd


def segment_eval(q0, dq0, q1, dq1, h_seg, u):
    """Evaluate Hermite segments at parameters u.

    q0/dq0/q1/dq1: (..., dof); h_seg: (...,) segment durations;
    u: (S,) normalized sample points. Returns (q, dq) with shape
    (..., S, dof).
    """
    hb, hd = hermite_bases(u)  # (S, 4)
    h_seg = np.asarray(h_seg, dtype=float)[..., None, None]
    stack = np.stack([q0, dq0 * h_seg[..., 0, :], q1, dq1 * h_seg[..., 0, :]], axis=-2)[..., None, :, :]
    qs = np.sum(hb[:, :, None] * stack, axis=-2)
    dqs = np.sum(hd[:, :, None] * stack, axis=-2) / h_seg
    return qs, dqs


def interpolate(traj: Trajectory, t: float):
    """Configuration and joint velocity at time t; exact at knots."""
    times = traj.times
    if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
        raise OutOfRange(f"t={t} outside [0, {times[-1]}]")
    t = min(max(t, times[0]), times[-1])
    j = int(np.searchsorted(times, t, side="right") - 1)
    j = min(max(j, 0), traj.n_waypoints - 2)
    if t == times[j]:
        return traj.q[j].copy(), traj.dq[j].copy()
    if t == times[j + 1]:
        return traj.q[j + 1].copy(), traj.dq[j + 1].copy()
    h_seg = times[j + 1] - times[j]
    u = (t - times[j]) / h_seg
    qs, dqs = segment_eval(traj.q[j], traj.dq[j], traj.q[j + 1], traj.dq[j + 1], np.array(h_seg), np.array([u]))
    return qs[0], dqs[0]


def smoothness_closed_form(q0, dq0, q1, dq1, h_seg):
    """Exact integral of sum_i q'_i(t)^2 over Hermite segments.

    Inputs shaped (..., dof) with segment durations (...,). The
    integrand is the square of a quadratic, integrated analytically.
    """
    h = np.asarray(h_seg, dtype=float)[..., None]
    b = h * dq0
    c = -3 * q0 - 2 * h * dq0 + 3 * q1 - h * dq1
    d = 2 * q0 + h * dq0 - 2 * q1 + h * dq1
    integral_u = b * b + (4.0 / 3.0) * c * c + 1.8 * d * d + 2 * b * c + 2 * b * d + 3 * c * d
    return np.sum(integral_u / h, axis=-1)


def trajectory_smoothness(traj: Trajectory) -> float:
    h = np.diff(traj.times)
    return float(
        np.sum(smoothness_closed_form(traj.q[:-1], traj.dq[:-1], traj.q[1:], traj.dq[1:], h))
    )


def trajectory_metrics(traj: Trajectory):
    """(duration, smoothness cost divided by duration)."""
    d = traj.duration
    return d, trajectory_smoothness(traj) / d


def segment_extrema_ok(q0, dq0, q1, dq1, h_seg, q_min, q_max, tol=1e-9):
    """True where the Hermite segment stays inside joint bounds for all t."""
    h = np.asarray(h_seg, dtype=float)[..., None]
    b = h * dq0
    c = -3 * q0 - 2 * h * dq0 + 3 * q1 - h * dq1
    d = 2 * q0 + h * dq0 - 2 * q1 + h * dq1
    a0 = q0
    ok = np.ones(np.shape(q0)[:-1], dtype=bool)
    # roots of q'(u) = b + 2c u + 3d u^2
    aa, bb, cc = 3 * d, 2 * c, b
    disc = bb * bb - 4 * aa * cc
    safe = np.where(np.abs(aa) < 1e-14, 1.0, aa)
    sq = np.sqrt(np.maximum(disc, 0.0))
    for sign in (-1.0, 1.0):
        u = np.where(np.abs(aa) < 1e-14, np.where(np.abs(bb) < 1e-14, -1.0, -cc / np.where(np.abs(bb) < 1e-14, 1.0, bb)), (-bb + sign * sq) / (2 * safe))
        inside = (u > 0.0) & (u < 1.0) & (disc >= 0)
        qu = a0 + b * u + c * u * u + d * u ** 3
        viol = inside & ((qu > q_max + tol) | (qu < q_min - tol))
        ok &= ~np.any(viol, axis=-1)
    return ok
