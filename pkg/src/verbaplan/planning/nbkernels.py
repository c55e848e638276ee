"""Compiled segment-cost kernel.

Evaluates every cost term over batches of Hermite segments in one pass:
sample the segment, run the forward-kinematics chain, transform
capsules, and accumulate each term's trapezoid integrand. Rows are
independent, so the loop parallelizes across cores. Results match the
vectorized numpy path in costs.py to machine precision; that path stays
the reference implementation in the test suite.
"""
from __future__ import annotations

import numpy as np

try:
    from numba import njit, prange

    from ..kinematics import _box_sd_scalar  # jitted scalar box distance

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*a, **k):  # type: ignore
        def deco(f):
            return f

        return deco

    prange = range

    def _box_sd_scalar(px, py, pz, hx, hy, hz):  # pragma: no cover
        q = np.array([abs(px) - hx, abs(py) - hy, abs(pz) - hz])
        return float(np.linalg.norm(np.maximum(q, 0.0)) + min(q.max(), 0.0))

from ..kinematics import GOLDEN_ITERS  # noqa: E402,F401

TERM_CODES = {"smoothness": 0, "collision": 1, "position": 2, "orientation": 3, "upvector": 4, "speed": 5, "repulsion": 6}

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0
_INVPHI2 = _INVPHI * _INVPHI


@njit(cache=True, inline="always")
def _qmul(aw, ax, ay, az, bw, bx, by, bz):
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


@njit(cache=True, inline="always")
def _qrot(qw, qx, qy, qz, vx, vy, vz):
    # v + 2 w (u x v) + 2 (u x (u x v))
    cx = qy * vz - qz * vy
    cy = qz * vx - qx * vz
    cz = qx * vy - qy * vx
    dx = qy * cz - qz * cy
    dy = qz * cx - qx * cz
    dz = qx * cy - qy * cx
    return vx + 2.0 * (qw * cx + dx), vy + 2.0 * (qw * cy + dy), vz + 2.0 * (qw * cz + dz)


@njit(cache=True, fastmath=True)
def _seg_box_min_pen(ax, ay, az, bx, by, bz, hx, hy, hz, clearance, iters):
    """max(0, clearance - min signed distance along the segment)."""
    dx, dy, dz = bx - ax, by - ay, bz - az
    f_lo = _box_sd_scalar(ax, ay, az, hx, hy, hz)
    f_hi = _box_sd_scalar(bx, by, bz, hx, hy, hz)
    f_mid = _box_sd_scalar(ax + 0.5 * dx, ay + 0.5 * dy, az + 0.5 * dz, hx, hy, hz)
    best = min(f_lo, f_hi, f_mid)
    seg_len = (dx * dx + dy * dy + dz * dz) ** 0.5
    if best - 0.25 * seg_len > clearance:
        return 0.0
    lo = 0.0
    h = 1.0
    x1 = _INVPHI2
    x2 = _INVPHI
    f1 = _box_sd_scalar(ax + x1 * dx, ay + x1 * dy, az + x1 * dz, hx, hy, hz)
    f2 = _box_sd_scalar(ax + x2 * dx, ay + x2 * dy, az + x2 * dz, hx, hy, hz)
    for _ in range(iters):
        if f1 <= f2:
            h *= _INVPHI
            x2 = x1
            f2 = f1
            x1 = lo + _INVPHI2 * h
            f1 = _box_sd_scalar(ax + x1 * dx, ay + x1 * dy, az + x1 * dz, hx, hy, hz)
        else:
            lo = x1
            h *= _INVPHI
            x1 = x2
            f1 = f2
            x2 = lo + _INVPHI * h
            f2 = _box_sd_scalar(ax + x2 * dx, ay + x2 * dy, az + x2 * dz, hx, hy, hz)
    sd = min(best, min(f1, f2))
    pen = clearance - sd
    return pen if pen > 0.0 else 0.0


@njit(cache=True, parallel=True, fastmath=True)
def segment_costs_nb(
    q0, dq0, q1, dq1, hseg,  # (R, dof) x4, (R,)
    basis, dbasis, trapw,  # (S, 4), (S, 4), (S,)
    axes, offp, offq, basep, baseq, eeoff, eeqoff,  # arm description
    cap_link, cap_p0, cap_p1, cap_r,  # capsules
    obs_pos, obs_quat, obs_half,  # obstacles
    terms,  # (T, 9): code, p0..p6, extra
    margin, iters,
):
    R = q0.shape[0]
    dof = q0.shape[1]
    S = basis.shape[0]
    T = terms.shape[0]
    C = cap_link.shape[0]
    O = obs_pos.shape[0]
    out = np.zeros((R, T))

    need_fk = False
    need_caps = False
    need_vel = False
    for t in range(T):
        code = int(terms[t, 0])
        if code != 0:
            need_fk = True
        if code == 1:
            need_caps = True
        if code == 5:
            need_vel = True

    for r in prange(R):
        h = hseg[r]
        # smoothness closed form
        for t in range(T):
            if int(terms[t, 0]) == 0:
                acc = 0.0
                for j in range(dof):
                    b = h * dq0[r, j]
                    c3 = -3.0 * q0[r, j] - 2.0 * h * dq0[r, j] + 3.0 * q1[r, j] - h * dq1[r, j]
                    d3 = 2.0 * q0[r, j] + h * dq0[r, j] - 2.0 * q1[r, j] + h * dq1[r, j]
                    acc += (b * b + (4.0 / 3.0) * c3 * c3 + 1.8 * d3 * d3 + 2.0 * b * c3 + 2.0 * b * d3 + 3.0 * c3 * d3) / h
                out[r, t] = acc
        if not need_fk:
            continue

        qs = np.empty(dof)
        dqs = np.empty(dof)
        link_q = np.empty((dof, 4))
        link_p = np.empty((dof, 3))
        origins = np.empty((dof, 3))
        axes_w = np.empty((dof, 3))
        for s in range(S):
            b0, b1, b2, b3 = basis[s, 0], basis[s, 1], basis[s, 2], basis[s, 3]
            g0, g1, g2, g3 = dbasis[s, 0], dbasis[s, 1], dbasis[s, 2], dbasis[s, 3]
            for j in range(dof):
                qs[j] = b0 * q0[r, j] + b1 * h * dq0[r, j] + b2 * q1[r, j] + b3 * h * dq1[r, j]
                dqs[j] = (g0 * q0[r, j] + g1 * h * dq0[r, j] + g2 * q1[r, j] + g3 * h * dq1[r, j]) / h
            # forward kinematics chain
            qw, qx, qy, qz = baseq[0], baseq[1], baseq[2], baseq[3]
            tx, ty, tz = basep[0], basep[1], basep[2]
            for j in range(dof):
                ox, oy, oz = _qrot(qw, qx, qy, qz, offp[j, 0], offp[j, 1], offp[j, 2])
                tx, ty, tz = tx + ox, ty + oy, tz + oz
                qw, qx, qy, qz = _qmul(qw, qx, qy, qz, offq[j, 0], offq[j, 1], offq[j, 2], offq[j, 3])
                origins[j, 0], origins[j, 1], origins[j, 2] = tx, ty, tz
                awx, awy, awz = _qrot(qw, qx, qy, qz, axes[j, 0], axes[j, 1], axes[j, 2])
                axes_w[j, 0], axes_w[j, 1], axes_w[j, 2] = awx, awy, awz
                half_ang = 0.5 * qs[j]
                sw = np.cos(half_ang)
                sv = np.sin(half_ang)
                qw, qx, qy, qz = _qmul(qw, qx, qy, qz, sw, sv * axes[j, 0], sv * axes[j, 1], sv * axes[j, 2])
                link_q[j, 0], link_q[j, 1], link_q[j, 2], link_q[j, 3] = qw, qx, qy, qz
                link_p[j, 0], link_p[j, 1], link_p[j, 2] = tx, ty, tz
            ex, ey, ez = _qrot(qw, qx, qy, qz, eeoff[0], eeoff[1], eeoff[2])
            eex, eey, eez = tx + ex, ty + ey, tz + ez
            # tool frame orientation
            qw, qx, qy, qz = _qmul(qw, qx, qy, qz, eeqoff[0], eeqoff[1], eeqoff[2], eeqoff[3])
            w = trapw[s] * h

            vex = vey = vez = 0.0
            if need_vel:
                for j in range(dof):
                    rx, ry, rz = eex - origins[j, 0], eey - origins[j, 1], eez - origins[j, 2]
                    vex += (axes_w[j, 1] * rz - axes_w[j, 2] * ry) * dqs[j]
                    vey += (axes_w[j, 2] * rx - axes_w[j, 0] * rz) * dqs[j]
                    vez += (axes_w[j, 0] * ry - axes_w[j, 1] * rx) * dqs[j]

            coll = -1.0
            for t in range(T):
                code = int(terms[t, 0])
                if code == 0:
                    continue
                if code == 1:
                    if coll < 0.0:
                        coll = 0.0
                        if need_caps:
                            for k in range(C):
                                lj = int(cap_link[k])
                                lw, lx, ly, lz = link_q[lj, 0], link_q[lj, 1], link_q[lj, 2], link_q[lj, 3]
                                p0x, p0y, p0z = _qrot(lw, lx, ly, lz, cap_p0[k, 0], cap_p0[k, 1], cap_p0[k, 2])
                                p1x, p1y, p1z = _qrot(lw, lx, ly, lz, cap_p1[k, 0], cap_p1[k, 1], cap_p1[k, 2])
                                p0x += link_p[lj, 0]; p0y += link_p[lj, 1]; p0z += link_p[lj, 2]
                                p1x += link_p[lj, 0]; p1y += link_p[lj, 1]; p1z += link_p[lj, 2]
                                for o in range(O):
                                    vax = p0x - obs_pos[o, 0]; vay = p0y - obs_pos[o, 1]; vaz = p0z - obs_pos[o, 2]
                                    vbx = p1x - obs_pos[o, 0]; vby = p1y - obs_pos[o, 1]; vbz = p1z - obs_pos[o, 2]
                                    # conjugate rotation into the box frame
                                    bw, bx, by, bz = obs_quat[o, 0], -obs_quat[o, 1], -obs_quat[o, 2], -obs_quat[o, 3]
                                    lax, lay, laz = _qrot(bw, bx, by, bz, vax, vay, vaz)
                                    lbx, lby, lbz = _qrot(bw, bx, by, bz, vbx, vby, vbz)
                                    pen = _seg_box_min_pen(
                                        lax, lay, laz, lbx, lby, lbz,
                                        obs_half[o, 0], obs_half[o, 1], obs_half[o, 2],
                                        margin + cap_r[k], iters,
                                    )
                                    coll += pen * pen
                    out[r, t] += coll * w
                elif code == 2:  # position
                    dx = eex - terms[t, 1]; dy = eey - terms[t, 2]; dz = eez - terms[t, 3]
                    out[r, t] += (dx * dx + dy * dy + dz * dz) * w
                elif code == 3:  # orientation (quaternion target)
                    dot = qw * terms[t, 1] + qx * terms[t, 2] + qy * terms[t, 3] + qz * terms[t, 4]
                    dot = abs(dot)
                    if dot > 1.0:
                        dot = 1.0
                    ang = 2.0 * np.arccos(dot)
                    out[r, t] += ang * ang * w
                elif code == 4:  # up-vector
                    ux, uy, uz = _qrot(qw, qx, qy, qz, 0.0, 0.0, 1.0)
                    dot = ux * terms[t, 1] + uy * terms[t, 2] + uz * terms[t, 3]
                    if dot > 1.0:
                        dot = 1.0
                    if dot < -1.0:
                        dot = -1.0
                    ang = np.arccos(dot)
                    out[r, t] += ang * ang * w
                elif code == 5:  # speed
                    dx = vex - terms[t, 1]; dy = vey - terms[t, 2]; dz = vez - terms[t, 3]
                    out[r, t] += (dx * dx + dy * dy + dz * dz) * w
                elif code == 6:  # repulsion
                    dx = eex - terms[t, 1]; dy = eey - terms[t, 2]; dz = eez - terms[t, 3]
                    dist = (dx * dx + dy * dy + dz * dz) ** 0.5
                    out[r, t] += np.exp(-terms[t, 4] * dist) * w
    return out


def pack_terms(terms) -> np.ndarray:
    """Encode cost terms for the compiled kernel."""
    packed = np.zeros((len(terms), 9))
    for i, t in enumerate(terms):
        packed[i, 0] = TERM_CODES[t.kind]
        if t.kind == "position":
            packed[i, 1:4] = t.param("target")
        elif t.kind == "orientation":
            packed[i, 1:5] = t.param("target")
        elif t.kind in ("upvector", "speed"):
            packed[i, 1:4] = t.param("target")
        elif t.kind == "repulsion":
            packed[i, 1:4] = t.param("source")
            packed[i, 4] = t.param("c")
    return packed


def pack_arm(arm):
    cap_link = np.array([c.link for c in arm.capsules], dtype=np.int64)
    cap_p0 = np.array([c.p0 for c in arm.capsules]) if arm.capsules else np.zeros((0, 3))
    cap_p1 = np.array([c.p1 for c in arm.capsules]) if arm.capsules else np.zeros((0, 3))
    cap_r = np.array([c.radius for c in arm.capsules])
    return (
        np.ascontiguousarray(arm.joint_axes),
        np.ascontiguousarray(arm.offset_positions),
        np.ascontiguousarray(arm.offset_orientations),
        np.ascontiguousarray(arm.base_position),
        np.ascontiguousarray(arm.base_orientation),
        np.ascontiguousarray(arm.ee_offset),
        np.ascontiguousarray(arm.ee_orientation_offset),
        cap_link, cap_p0, cap_p1, cap_r,
    )


def pack_obstacles(obstacles):
    if not obstacles:
        return np.zeros((0, 3)), np.zeros((0, 4)), np.zeros((0, 3))
    return (
        np.array([o.position for o in obstacles]),
        np.array([o.orientation for o in obstacles]),
        np.array([o.half_extents for o in obstacles]),
    )
