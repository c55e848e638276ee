"""Serial-arm forward kinematics and capsule/box collision geometry.

Links carry capsules (segment + radius) in their own frames; obstacles
are oriented boxes. The signed distance from a box to a point moving
along a segment is convex in the segment parameter, so the minimum is
found by ternary search, vectorized over arbitrarily many
(configuration, capsule, obstacle) tasks at once. An enclosing-sphere
test prunes far pairs before the search runs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .geometry import (
    IDENTITY_QUAT,
    quat_from_axis_angle,
    quat_multiply,
    quat_normalize,
    quat_rotate,
    transform_apply,
    transform_compose,
)
from .world import ObjectEntity

DEFAULT_MARGIN = 0.02  # meters of clearance penalized before true contact


@dataclass(frozen=True)
class Capsule:
    link: int
    p0: np.ndarray  # segment start, link frame
    p1: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "p0", np.asarray(self.p0, dtype=float))
        object.__setattr__(self, "p1", np.asarray(self.p1, dtype=float))
        if self.radius <= 0:
            raise ValueError("capsule radius must be positive")


@dataclass(frozen=True)
class EEPose:
    position: np.ndarray
    orientation: np.ndarray  # unit quaternion wxyz
    up_vector: np.ndarray  # orientation applied to local +z

    @classmethod
    def from_transform(cls, q, t):
        return cls(position=np.asarray(t, dtype=float), orientation=quat_normalize(q), up_vector=quat_rotate(q, np.array([0.0, 0.0, 1.0])))


@dataclass(frozen=True)
class ArmModel:
    name: str
    joint_axes: np.ndarray  # (n, 3) unit vectors
    offset_positions: np.ndarray  # (n, 3) fixed translation before each joint
    offset_orientations: np.ndarray  # (n, 4) fixed rotation before each joint
    capsules: tuple[Capsule, ...]
    q_min: np.ndarray
    q_max: np.ndarray
    dq_min: np.ndarray
    dq_max: np.ndarray
    base_position: np.ndarray
    base_orientation: np.ndarray
    ee_offset: np.ndarray = (0.0, 0.0, 0.0)  # tool tip in the last link frame
    # tool frame rotation in the last link frame; lets a top-down
    # gripper count as upright while carrying
    ee_orientation_offset: np.ndarray = (1.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("joint_axes", "offset_positions", "offset_orientations", "q_min", "q_max", "dq_min", "dq_max", "base_position", "base_orientation", "ee_offset", "ee_orientation_offset"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        axes = self.joint_axes / np.linalg.norm(self.joint_axes, axis=1, keepdims=True)
        object.__setattr__(self, "joint_axes", axes)
        object.__setattr__(self, "capsules", tuple(self.capsules))
        if not np.all(self.q_min < self.q_max):
            raise ValueError("q_min must be strictly below q_max")
        if not np.all(self.dq_min < self.dq_max):
            raise ValueError("dq_min must be strictly below dq_max")

    @property
    def dof(self) -> int:
        return self.joint_axes.shape[0]

    def clip(self, q, dq=None):
        q = np.clip(q, self.q_min, self.q_max)
        if dq is None:
            return q
        return q, np.clip(dq, self.dq_min, self.dq_max)


def fk_batch(arm: ArmModel, Q):
    """Forward kinematics over a batch of configurations.

    Q has shape (..., dof). Returns (link_quats, link_pos, joint_origins,
    joint_axes_world) with shapes (..., dof, 4/3/3/3). Link frame i is
    the frame after joint i's rotation.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.shape[-1] != arm.dof:
        raise DimensionMismatch(f"expected {arm.dof} joint values, got {Q.shape[-1]}")
    batch = Q.shape[:-1]
    quats = np.empty(batch + (arm.dof, 4))
    positions = np.empty(batch + (arm.dof, 3))
    origins = np.empty(batch + (arm.dof, 3))
    axes_world = np.empty(batch + (arm.dof, 3))
    q_acc = np.broadcast_to(arm.base_orientation, batch + (4,)).copy()
    t_acc = np.broadcast_to(arm.base_position, batch + (3,)).copy()
    for i in range(arm.dof):
        q_acc, t_acc = transform_compose(q_acc, t_acc, arm.offset_orientations[i], arm.offset_positions[i])
        origins[..., i, :] = t_acc
        axes_world[..., i, :] = quat_rotate(q_acc, arm.joint_axes[i])
        joint_rot = quat_from_axis_angle(arm.joint_axes[i], Q[..., i])
        q_acc = quat_multiply(q_acc, joint_rot)
        quats[..., i, :] = q_acc
        positions[..., i, :] = t_acc
    return quats, positions, origins, axes_world


def ee_from_fk(arm: ArmModel, quats, positions):
    """Tool-tip position given link frames (..., dof, 4/3)."""
    return transform_apply(quats[..., -1, :], positions[..., -1, :], arm.ee_offset)


def ee_quat_from_fk(arm: ArmModel, quats):
    return quat_multiply(quats[..., -1, :], arm.ee_orientation_offset)


def fk(arm: ArmModel, q):
    """Per-link world transforms and the end-effector pose."""
    quats, positions, _, _ = fk_batch(arm, np.asarray(q, dtype=float))
    links = [(quats[i], positions[i]) for i in range(arm.dof)]
    ee = EEPose.from_transform(ee_quat_from_fk(arm, quats), ee_from_fk(arm, quats, positions))
    return links, ee


def ee_position_batch(arm: ArmModel, Q):
    quats, positions, _, _ = fk_batch(arm, Q)
    return ee_from_fk(arm, quats, positions)


def ee_velocity_batch(arm: ArmModel, Q, dQ):
    """Linear end-effector velocity J(q) dq for batches of (q, dq)."""
    dQ = np.asarray(dQ, dtype=float)
    if dQ.shape[-1] != arm.dof:
        raise DimensionMismatch(f"expected {arm.dof} joint rates, got {dQ.shape[-1]}")
    quats, positions, origins, axes_world = fk_batch(arm, Q)
    p_ee = ee_from_fk(arm, quats, positions)[..., None, :]
    arms_to_ee = p_ee - origins
    contrib = np.cross(axes_world, arms_to_ee) * dQ[..., :, None]
    return contrib.sum(axis=-2)


def ee_velocity(arm: ArmModel, q, dq):
    return ee_velocity_batch(arm, np.asarray(q, dtype=float), np.asarray(dq, dtype=float))


def capsule_world_segments(arm: ArmModel, Q):
    """World-frame capsule endpoints for configurations Q (..., dof).

    Returns (P0, P1, radii): P0/P1 shaped (..., n_caps, 3).
    """
    quats, positions, _, _ = fk_batch(arm, Q)
    n_caps = len(arm.capsules)
    batch = np.asarray(Q).shape[:-1]
    P0 = np.empty(batch + (n_caps, 3))
    P1 = np.empty(batch + (n_caps, 3))
    radii = np.array([c.radius for c in arm.capsules])
    for k, cap in enumerate(arm.capsules):
        q_l = quats[..., cap.link, :]
        t_l = positions[..., cap.link, :]
        P0[..., k, :] = transform_apply(q_l, t_l, cap.p0)
        P1[..., k, :] = transform_apply(q_l, t_l, cap.p1)
    return P0, P1, radii


def box_signed_distance(points, half):
    """Signed distance from points (..., 3) to an origin-centered box."""
    q = np.abs(points) - half
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
    inside = np.minimum(np.max(q, axis=-1), 0.0)
    return outside + inside


GOLDEN_ITERS = 30  # brackets the minimizer to ~1e-6 of the segment: smooth to ~1e-13
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0
_INVPHI2 = _INVPHI * _INVPHI


def segment_box_min_sd(p0, p1, half, iters=GOLDEN_ITERS):
    """Min signed box distance along segments, by golden-section search.

    p0, p1: (..., 3) endpoints in the box frame. The signed distance to
    a convex body is convex along a line, so the section search finds
    the global minimum; the default bracket is tight enough that the
    result is smooth in the endpoints to machine precision, which keeps
    finite differences of collision costs clean.
    """
    p0 = np.asarray(p0, dtype=float)
    d = np.asarray(p1, dtype=float) - p0
    shape = p0.shape[:-1]

    def f(t):
        return box_signed_distance(p0 + t[..., None] * d, half)

    lo = np.zeros(shape)
    h = np.ones(shape)
    x1 = lo + _INVPHI2 * h
    x2 = lo + _INVPHI * h
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        take_lo = f1 <= f2  # minimizer lies in [lo, x2]
        lo = np.where(take_lo, lo, x1)
        h = h * _INVPHI
        x1 = lo + _INVPHI2 * h
        x2 = lo + _INVPHI * h
        f1, f2 = np.where(take_lo, f(x1), f2), np.where(take_lo, f1, f(x2))
    interior = np.minimum(f1, f2)
    ends = np.minimum(box_signed_distance(p0, half), box_signed_distance(np.asarray(p1, dtype=float), half))
    return np.minimum(interior, ends)


def penetration_depth(p0, p1, radius: float, obstacle: ObjectEntity, margin: float = DEFAULT_MARGIN) -> float:
    """Penetration of a world-frame capsule against an oriented box.

    Zero once the capsule surface clears the box by more than `margin`;
    grows linearly with overlap beyond that. Continuous everywhere.
    """
    q_inv = obstacle.orientation * np.array([1.0, -1.0, -1.0, -1.0])
    a = quat_rotate(q_inv, np.asarray(p0, dtype=float) - obstacle.position)
    b = quat_rotate(q_inv, np.asarray(p1, dtype=float) - obstacle.position)
    sd = segment_box_min_sd(a[None], b[None], obstacle.half_extents)[0]
    return float(max(0.0, margin + radius - sd))


try:  # hot path: scalar golden-section loop per (segment, box) task
    from numba import njit as _njit

    @_njit(cache=True, fastmath=True)
    def _box_sd_scalar(px, py, pz, hx, hy, hz):
        qx, qy, qz = abs(px) - hx, abs(py) - hy, abs(pz) - hz
        ox = qx if qx > 0.0 else 0.0
        oy = qy if qy > 0.0 else 0.0
        oz = qz if qz > 0.0 else 0.0
        outside = (ox * ox + oy * oy + oz * oz) ** 0.5
        m = qx
        if qy > m:
            m = qy
        if qz > m:
            m = qz
        inside = m if m < 0.0 else 0.0
        return outside + inside

    @_njit(cache=True, fastmath=True)
    def _seg_box_depths_nb(A, B, hx, hy, hz, radii, margin, iters):
        n = A.shape[0]
        out = np.zeros(n)
        invphi = _INVPHI
        invphi2 = _INVPHI2
        for i in range(n):
            ax, ay, az = A[i, 0], A[i, 1], A[i, 2]
            dx, dy, dz = B[i, 0] - ax, B[i, 1] - ay, B[i, 2] - az
            f_lo = _box_sd_scalar(ax, ay, az, hx, hy, hz)
            f_hi = _box_sd_scalar(ax + dx, ay + dy, az + dz, hx, hy, hz)
            f_mid = _box_sd_scalar(ax + 0.5 * dx, ay + 0.5 * dy, az + 0.5 * dz, hx, hy, hz)
            best = min(f_lo, f_hi, f_mid)
            seg_len = (dx * dx + dy * dy + dz * dz) ** 0.5
            clearance = margin + radii[i]
            # 1-Lipschitz bound: samples at 0, .5, 1 are within len/4 of any t
            if best - 0.25 * seg_len > clearance:
                continue
            lo = 0.0
            h = 1.0
            x1 = invphi2
            x2 = invphi
            f1 = _box_sd_scalar(ax + x1 * dx, ay + x1 * dy, az + x1 * dz, hx, hy, hz)
            f2 = _box_sd_scalar(ax + x2 * dx, ay + x2 * dy, az + x2 * dz, hx, hy, hz)
            for _ in range(iters):
                if f1 <= f2:
                    h *= invphi
                    x2 = x1
                    f2 = f1
                    x1 = lo + invphi2 * h
                    f1 = _box_sd_scalar(ax + x1 * dx, ay + x1 * dy, az + x1 * dz, hx, hy, hz)
                else:
                    lo = x1
                    h *= invphi
                    x1 = x2
                    f1 = f2
                    x2 = lo + invphi * h
                    f2 = _box_sd_scalar(ax + x2 * dx, ay + x2 * dy, az + x2 * dz, hx, hy, hz)
            sd = min(best, f1, f2)
            pen = clearance - sd
            if pen > 0.0:
                out[i] = pen
        return out

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    HAVE_NUMBA = False


def batch_penetrations(P0, P1, radii, obstacles, margin: float = DEFAULT_MARGIN, iters=GOLDEN_ITERS):
    """Penetration depths for capsule batches against each obstacle.

    P0, P1: (..., n_caps, 3); radii: (n_caps,). Returns an array of
    shape (..., n_caps, n_obs). Uses the compiled per-task search when
    numba is available, the vectorized fallback otherwise; both run the
    same golden-section algorithm.
    """
    P0 = np.asarray(P0, dtype=float)
    P1 = np.asarray(P1, dtype=float)
    shape = P0.shape[:-1]
    out = np.zeros(shape + (len(obstacles),))
    if not obstacles:
        return out
    rad = np.broadcast_to(radii, shape)
    flat_rad = np.ascontiguousarray(rad.reshape(-1))
    for j, obs in enumerate(obstacles):
        q_inv = obs.orientation * np.array([1.0, -1.0, -1.0, -1.0])
        a = quat_rotate(q_inv, P0 - obs.position)
        b = quat_rotate(q_inv, P1 - obs.position)
        hx, hy, hz = obs.half_extents
        if HAVE_NUMBA:
            pen = _seg_box_depths_nb(
                np.ascontiguousarray(a.reshape(-1, 3)),
                np.ascontiguousarray(b.reshape(-1, 3)),
                float(hx), float(hy), float(hz),
                flat_rad, float(margin), int(iters),
            ).reshape(shape)
            out[..., j] = pen
        else:
            sd = segment_box_min_sd(a, b, obs.half_extents, iters=iters)
            out[..., j] = np.maximum(0.0, margin + rad - sd)
    return out


def arm_to_dict(arm: ArmModel) -> dict:
    return {
        "name": arm.name,
        "base": {"position": list(map(float, arm.base_position)), "orientation": list(map(float, arm.base_orientation))},
        "joints": [
            {
                "axis": list(map(float, arm.joint_axes[i])),
                "offset_position": list(map(float, arm.offset_positions[i])),
                "offset_orientation": list(map(float, arm.offset_orientations[i])),
            }
            for i in range(arm.dof)
        ],
        "capsules": [
            {"link": c.link, "p0": list(map(float, c.p0)), "p1": list(map(float, c.p1)), "radius": c.radius}
            for c in arm.capsules
        ],
        "q_min": list(map(float, arm.q_min)),
        "q_max": list(map(float, arm.q_max)),
        "dq_min": list(map(float, arm.dq_min)),
        "dq_max": list(map(float, arm.dq_max)),
        "ee_offset": list(map(float, arm.ee_offset)),
        "ee_orientation_offset": list(map(float, arm.ee_orientation_offset)),
    }


def arm_from_dict(data: dict) -> ArmModel:
    joints = data["joints"]
    return ArmModel(
        name=data.get("name", "arm"),
        joint_axes=[j["axis"] for j in joints],
        offset_positions=[j["offset_position"] for j in joints],
        offset_orientations=[j.get("offset_orientation", list(IDENTITY_QUAT)) for j in joints],
        capsules=tuple(Capsule(link=int(c["link"]), p0=c["p0"], p1=c["p1"], radius=float(c["radius"])) for c in data["capsules"]),
        q_min=data["q_min"],
        q_max=data["q_max"],
        dq_min=data["dq_min"],
        dq_max=data["dq_max"],
        base_position=data.get("base", {}).get("position", [0, 0, 0]),
        base_orientation=data.get("base", {}).get("orientation", list(IDENTITY_QUAT)),
        ee_offset=data.get("ee_offset", [0, 0, 0]),
        ee_orientation_offset=data.get("ee_orientation_offset", list(IDENTITY_QUAT)),
    )


def load_arm(path) -> ArmModel:
    with open(path) as f:
        return arm_from_dict(json.load(f))


def save_arm(arm: ArmModel, path) -> None:
    with open(path, "w") as f:
        json.dump(arm_to_dict(arm), f, indent=2, sort_keys=True)
