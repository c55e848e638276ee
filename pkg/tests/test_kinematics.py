import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from verbaplan.geometry import quat_from_axis_angle, quat_rotate, quat_to_matrix
from verbaplan.kinematics import (
    ArmModel,
    Capsule,
    batch_penetrations,
    capsule_world_segments,
    ee_velocity,
    fk,
    penetration_depth,
    segment_box_min_sd,
)
from verbaplan.world import ObjectEntity


def planar_arm(lengths=(1.0, 1.0), base_z=0.0):
    n = len(lengths)
    return ArmModel(
        name="test",
        joint_axes=[[0, 0, 1]] * n,
        offset_positions=[[0, 0, 0]] + [[lengths[i], 0, 0] for i in range(n - 1)],
        offset_orientations=[[1, 0, 0, 0]] * n,
        capsules=(Capsule(link=n - 1, p0=[0, 0, 0], p1=[lengths[-1], 0, 0], radius=0.05),),
        q_min=[-np.pi] * n,
        q_max=[np.pi] * n,
        dq_min=[-5] * n,
        dq_max=[5] * n,
        base_position=[0, 0, base_z],
        base_orientation=[1, 0, 0, 0],
        ee_offset=[lengths[-1], 0, 0],
    )


def test_fk_straight_line():
    arm = planar_arm((1.0, 1.0), base_z=0.3)
    _, ee = fk(arm, [0.0, 0.0])
    assert np.allclose(ee.position, [2.0, 0.0, 0.3], atol=1e-12)


def test_fk_quarter_turn():
    arm = planar_arm((1.0, 1.0), base_z=0.3)
    _, ee = fk(arm, [np.pi / 2, 0.0])
    assert np.allclose(ee.position, [0.0, 2.0, 0.3], atol=1e-12)


def matrix_fk(arm: ArmModel, q):
    """Independent oracle: explicit 4x4 homogeneous matrix chain."""

    def tf(rot_q, trans):
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(rot_q)
        m[:3, 3] = trans
        return m

    T = tf(arm.base_orientation, arm.base_position)
    frames = []
    for i in range(arm.dof):
        T = T @ tf(arm.offset_orientations[i], arm.offset_positions[i])
        T = T @ tf(quat_from_axis_angle(arm.joint_axes[i], q[i]), [0, 0, 0])
        frames.append(T.copy())
    ee = T @ tf([1, 0, 0, 0], arm.ee_offset)
    return frames, ee


def test_fk_matches_matrix_oracle(arm7):
    rng = np.random.default_rng(3)
    for _ in range(25):
        q = rng.uniform(arm7.q_min, arm7.q_max)
        links, ee = fk(arm7, q)
        frames, ee_m = matrix_fk(arm7, q)
        for (qq, tt), F in zip(links, frames):
            assert np.allclose(tt, F[:3, 3], atol=1e-10)
            assert np.allclose(quat_to_matrix(qq), F[:3, :3], atol=1e-10)
        assert np.allclose(ee.position, ee_m[:3, 3], atol=1e-10)


def test_fk_rigid_link_lengths(arm7):
    rng = np.random.default_rng(5)
    lengths = None
    for _ in range(10):
        q = rng.uniform(arm7.q_min, arm7.q_max)
        links, _ = fk(arm7, q)
        pos = np.array([t for _, t in links])
        cur = np.linalg.norm(np.diff(pos, axis=0), axis=1)
        if lengths is None:
            lengths = cur
        assert np.allclose(cur, lengths, atol=1e-10)


def test_ee_velocity_zero_rate(arm7):
    assert np.allclose(ee_velocity(arm7, np.zeros(7), np.zeros(7)), 0.0)


def test_ee_velocity_unit_radius():
    arm = planar_arm((1.0,))
    v = ee_velocity(arm, [0.0], [1.0])
    assert np.allclose(v, [0.0, 1.0, 0.0], atol=1e-12)


def test_ee_velocity_matches_finite_difference(arm7):
    rng = np.random.default_rng(11)
    h = 1e-6
    for _ in range(10):
        q = rng.uniform(arm7.q_min * 0.8, arm7.q_max * 0.8)
        dq = rng.uniform(-1, 1, arm7.dof)
        v = ee_velocity(arm7, q, dq)
        _, ee_p = fk(arm7, q + h * dq)
        _, ee_m = fk(arm7, q - h * dq)
        v_fd = (ee_p.position - ee_m.position) / (2 * h)
        assert np.linalg.norm(v - v_fd) <= 1e-6 * max(1.0, np.linalg.norm(v))


def test_ee_velocity_linear_in_rate(arm7):
    rng = np.random.default_rng(13)
    q = rng.uniform(arm7.q_min * 0.8, arm7.q_max * 0.8)
    dq = rng.uniform(-1, 1, arm7.dof)
    assert np.allclose(ee_velocity(arm7, q, 2.5 * dq), 2.5 * ee_velocity(arm7, q, dq), atol=1e-12)


def box(center, half, quat=(1, 0, 0, 0), oid=1):
    return ObjectEntity(id=oid, kind="box", position=list(center), orientation=list(quat), half_extents=list(half))


def test_penetration_sphere_overlap():
    # point-capsule r=0.1 vs cube half 0.1 centered 0.15 away: overlap 0.05
    obs = box((0.15, 0, 0), (0.1, 0.1, 0.1))
    p = penetration_depth([0, 0, 0], [0, 0, 0], 0.1, obs, margin=0.0)
    assert p == pytest.approx(0.05, abs=1e-9)


def test_penetration_far_apart():
    obs = box((1.0, 0, 0), (0.1, 0.1, 0.1))
    assert penetration_depth([0, 0, 0], [0, 0, 0], 0.1, obs, margin=0.0) == 0.0


def brute_force_box_distance(p0, p1, obs, n_seg=10_000):
    """Sampled closest-point oracle, independent of the search in the
    implementation: dense samples along the segment, each measured to
    the box surface by exact point-to-face-rectangle distances."""
    h = np.asarray(obs.half_extents)
    ts = np.linspace(0, 1, n_seg)
    seg = np.asarray(p0) + ts[:, None] * (np.asarray(p1) - np.asarray(p0))
    local = quat_rotate(np.asarray(obs.orientation) * np.array([1, -1, -1, -1]), seg - np.asarray(obs.position))
    face_d = np.full(len(ts), np.inf)
    for axis in range(3):
        for sign in (-1.0, 1.0):
            others = [a for a in range(3) if a != axis]
            du = np.maximum(np.abs(local[:, others[0]]) - h[others[0]], 0.0)
            dv = np.maximum(np.abs(local[:, others[1]]) - h[others[1]], 0.0)
            dn = local[:, axis] - sign * h[axis]
            face_d = np.minimum(face_d, np.sqrt(du * du + dv * dv + dn * dn))
    inside = np.all(np.abs(local) <= h, axis=1)
    signed = np.where(inside, -face_d, face_d)
    return signed.min()


@pytest.mark.slow
def test_penetration_matches_sampled_oracle():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(300):
        center = rng.uniform(-0.3, 0.3, 3)
        half = rng.uniform(0.05, 0.3, 3)
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        quat = quat_from_axis_angle(axis, rng.uniform(0, np.pi))
        obs = box(center, half, quat)
        p0 = rng.uniform(-0.8, 0.8, 3)
        p1 = p0 + rng.uniform(-0.5, 0.5, 3)
        radius = rng.uniform(0.01, 0.1)
        margin = 0.0
        mine = penetration_depth(p0, p1, radius, obs, margin=margin)
        ref_sd = brute_force_box_distance(p0, p1, obs)
        ref = max(0.0, margin + radius - ref_sd)
        worst = max(worst, abs(mine - ref))
    assert worst <= 2e-3, f"worst deviation {worst}"


def test_penetration_continuous_and_nonnegative():
    obs = box((0.2, 0.05, -0.1), (0.15, 0.1, 0.2))
    rng = np.random.default_rng(3)
    for _ in range(50):
        p0 = rng.uniform(-0.5, 0.5, 3)
        p1 = p0 + rng.uniform(-0.4, 0.4, 3)
        r = 0.04
        base = penetration_depth(p0, p1, r, obs)
        assert base >= 0.0
        eps = 1e-6
        shifted = penetration_depth(p0 + eps, p1 + eps, r, obs)
        assert abs(shifted - base) < 1e-4


def test_batch_matches_scalar(arm, small_env):
    rng = np.random.default_rng(1)
    Q = rng.uniform(arm.q_min, arm.q_max, (20, arm.dof))
    P0, P1, radii = capsule_world_segments(arm, Q)
    pens = batch_penetrations(P0, P1, radii, small_env.obstacles)
    for i in (0, 7, 19):
        for k in range(len(radii)):
            for j, obs in enumerate(small_env.obstacles):
                ref = penetration_depth(P0[i, k], P1[i, k], radii[k], obs)
                assert pens[i, k, j] == pytest.approx(ref, abs=1e-9)


def test_golden_section_matches_dense_sampling():
    rng = np.random.default_rng(5)
    half = np.array([0.2, 0.12, 0.3])
    A = rng.uniform(-0.6, 0.6, (50, 3))
    B = A + rng.uniform(-0.5, 0.5, (50, 3))
    mine = segment_box_min_sd(A, B, half)
    ts = np.linspace(0, 1, 20001)
    for i in range(50):
        pts = A[i] + ts[:, None] * (B[i] - A[i])
        q = np.abs(pts) - half
        sd = np.linalg.norm(np.maximum(q, 0), axis=1) + np.minimum(q.max(axis=1), 0)
        assert mine[i] == pytest.approx(sd.min(), abs=2e-5)


def test_arm_json_round_trip(arm7, tmp_path):
    from verbaplan.kinematics import load_arm, save_arm

    path = tmp_path / "arm.json"
    save_arm(arm7, path)
    arm2 = load_arm(path)
    assert np.array_equal(arm2.joint_axes, arm7.joint_axes)
    assert np.array_equal(arm2.ee_offset, arm7.ee_offset)
    assert len(arm2.capsules) == len(arm7.capsules)
