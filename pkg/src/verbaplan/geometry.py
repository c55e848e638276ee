"""Quaternion and rigid-transform helpers.

Quaternions are (w, x, y, z) numpy arrays, kept unit-norm. A rigid
transform is a (quaternion, translation) pair; batched variants operate
on stacked arrays with the batch axis first.
"""
from __future__ import annotations

import numpy as np

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n < 1e-12):
        raise ValueError("cannot normalize zero quaternion")
    return q / n


def quat_multiply(a, b):
    """Hamilton product a*b, broadcasting over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    w1, x1, y1, z1 = np.moveaxis(a, -1, 0)
    w2, x2, y2, z2 = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=-1,
    )


def quat_from_axis_angle(axis, angle):
    """Unit quaternion for rotation by `angle` about unit `axis`.

    `angle` may be an array; the batch axis is prepended to the result.
    """
    axis = np.asarray(axis, dtype=float)
    angle = np.asarray(angle, dtype=float)
    half = 0.5 * angle
    s = np.sin(half)
    w = np.cos(half)
    xyz = np.multiply.outer(s, axis) if angle.ndim else s * axis
    return np.concatenate([np.expand_dims(w, -1), np.atleast_1d(xyz).reshape(w.shape + (3,))], axis=-1)


def quat_rotate(q, v):
    """Rotate vector(s) v by quaternion(s) q (broadcasting)."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    w = q[..., :1]
    u = q[..., 1:]
    uv = np.cross(u, v)
    return v + 2.0 * (w * uv + np.cross(u, uv))


def quat_to_matrix(q):
    w, x, y, z = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    m = np.empty(np.shape(w) + (3, 3))
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - w * z)
    m[..., 0, 2] = 2 * (x * z + w * y)
    m[..., 1, 0] = 2 * (x * y + w * z)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - w * x)
    m[..., 2, 0] = 2 * (x * z - w * y)
    m[..., 2, 1] = 2 * (y * z + w * x)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def quat_angle(a, b):
    """Angular distance between two unit quaternions, double-cover safe."""
    dot = np.abs(np.sum(np.asarray(a) * np.asarray(b), axis=-1))
    return 2.0 * np.arccos(np.clip(dot, -1.0, 1.0))


def vector_angle(a, b):
    """Angle between two unit vectors."""
    dot = np.sum(np.asarray(a) * np.asarray(b), axis=-1)
    return np.arccos(np.clip(dot, -1.0, 1.0))


def transform_compose(q1, t1, q2, t2):
    """(q1,t1) followed-by-applied-to (q2,t2): first 2 in 1's frame."""
    return quat_multiply(q1, q2), quat_rotate(q1, t2) + t1


def transform_apply(q, t, p):
    return quat_rotate(q, p) + t


def transform_inverse(q, t):
    qi = np.asarray(q, dtype=float) * np.array([1.0, -1.0, -1.0, -1.0])
    return qi, -quat_rotate(qi, t)
