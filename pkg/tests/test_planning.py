import numpy as np
import pytest

from verbaplan.datagen import default_arm, gen_environment
from verbaplan.errors import OutOfRange
from verbaplan.kinematics import fk
from verbaplan.mapping import CostTerm, PlanningProblem
from verbaplan.planning import (
    OptimizeOptions,
    Trajectory,
    canonical_init,
    cost_collision,
    cost_orientation,
    cost_position,
    cost_repulsion,
    cost_smoothness,
    cost_speed,
    cost_upvector,
    interpolate,
    optimize,
    plan,
    sampled_max_penetration,
    total_cost,
    trajectory_metrics,
)
from verbaplan.planning.costs import SegmentKernel, kernel_for
from verbaplan.planning.optimizer import _Batch, _uniform_times
from verbaplan.world import Environment, ObjectEntity, RobotState


@pytest.fixture(scope="module")
def arm():
    return default_arm()


@pytest.fixture(scope="module")
def pickup_problem(arm):
    env, state, scene = gen_environment(3, "pickup", arm)
    blues = [o for o in env.objects if o.color == "blue"]
    _, ee = fk(arm, state.joint_angles)
    target = min(blues, key=lambda o: float(np.linalg.norm(o.position - ee.position)))
    return PlanningProblem(
        terms=(
            CostTerm.make("collision", 3.0),
            CostTerm.make("smoothness", 1.0),
            CostTerm.make("position", 10.0, target=target.position),
            CostTerm.make("upvector", 30.0, target=(0, 0, 1)),
        ),
        arm=arm, env=env, start=state, ignored_object_ids=frozenset({target.id}),
    ), target


def still_traj(q, T=5.0, n=6):
    q = np.asarray(q, dtype=float)
    W = n
    return Trajectory(q=np.tile(q, (W, 1)), dq=np.zeros((W, len(q))), times=np.linspace(0, T, W))


def seeded_traj(arm, seed=0, W=10, T=5.0):
    rng = np.random.default_rng(seed)
    q = np.cumsum(rng.uniform(-0.2, 0.2, (W, arm.dof)), axis=0) + np.array([1.2, -1.0, -1.0])
    q = np.clip(q, arm.q_min, arm.q_max)
    dq = rng.uniform(-0.5, 0.5, (W, arm.dof))
    return Trajectory(q=q, dq=dq, times=np.linspace(0, T, W))


# --- interpolation -------------------------------------------------------


def test_interpolate_hits_knots_exactly(arm):
    traj = seeded_traj(arm, 1)
    for j in range(traj.n_waypoints):
        q, dq = interpolate(traj, traj.times[j])
        assert np.array_equal(q, traj.q[j])
        assert np.array_equal(dq, traj.dq[j])


def test_interpolate_symmetric_midpoint():
    traj = Trajectory(q=[[0.0], [1.0]], dq=[[0.0], [0.0]], times=[0.0, 2.0])
    q, _ = interpolate(traj, 1.0)
    assert q[0] == pytest.approx(0.5, abs=1e-12)


def test_interpolate_out_of_range(arm):
    traj = seeded_traj(arm)
    with pytest.raises(OutOfRange):
        interpolate(traj, -0.5)
    with pytest.raises(OutOfRange):
        interpolate(traj, traj.duration + 0.1)


def test_interpolate_derivative_matches_fd(arm):
    traj = seeded_traj(arm, 2)
    rng = np.random.default_rng(0)
    h = 1e-6
    for _ in range(20):
        t = rng.uniform(h, traj.duration - h)
        _, dq = interpolate(traj, t)
        qp, _ = interpolate(traj, t + h)
        qm, _ = interpolate(traj, t - h)
        fd = (qp - qm) / (2 * h)
        assert np.linalg.norm(fd - dq) <= 1e-6 * max(1.0, np.linalg.norm(dq))


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory(q=[[0.0], [1.0]], dq=[[0.0], [0.0]], times=[0.5, 1.0])  # t0 != 0
    with pytest.raises(ValueError):
        Trajectory(q=[[0.0], [1.0]], dq=[[0.0], [0.0]], times=[0.0, 0.0])


# --- cost terms -----------------------------------------------------------


def test_cost_collision_obstacle_free(arm):
    traj = seeded_traj(arm)
    env = Environment(())
    assert cost_collision(traj, env, arm) == 0.0


def test_cost_collision_constant_penetration(arm):
    # static arm, one obstacle at fixed depth: integral is depth^2 * T
    q0 = np.array([1.39, -1.14, -1.82])
    traj = still_traj(q0, T=5.0)
    _, ee = fk(arm, q0)
    from verbaplan.kinematics import capsule_world_segments, batch_penetrations

    obs = ObjectEntity(id=1, kind="box", position=ee.position + np.array([0.0, 0.0, 0.05]), orientation=[1, 0, 0, 0], half_extents=[0.02, 0.02, 0.02])
    env = Environment((obs,), frozenset({1}))
    P0, P1, radii = capsule_world_segments(arm, q0)
    pens = batch_penetrations(P0, P1, radii, (obs,))
    expected = float(np.sum(pens**2) * 5.0)
    got = cost_collision(traj, env, arm)
    assert got == pytest.approx(expected, rel=1e-9)
    assert pens.max() > 0  # scenario actually in contact


def test_cost_smoothness_stationary(arm):
    traj = still_traj([0.5, -0.5, 0.2])
    assert cost_smoothness(traj) == 0.0


def test_cost_smoothness_constant_rate():
    T, dq = 4.0, 0.3
    W = 5
    times = np.linspace(0, T, W)
    q = (times * dq)[:, None]
    traj = Trajectory(q=q, dq=np.full((W, 1), dq), times=times)
    delta = dq * T
    assert cost_smoothness(traj) == pytest.approx(delta**2 / T, rel=1e-12)


def test_cost_smoothness_matches_quadrature(arm):
    traj = seeded_traj(arm, 5)
    ref = 0.0
    ts = np.linspace(0, traj.duration, 100_001)
    dqs = np.array([interpolate(traj, t)[1] for t in ts])
    ref = np.trapezoid(np.sum(dqs**2, axis=1), ts)
    assert cost_smoothness(traj) == pytest.approx(ref, rel=1e-8)


def test_cost_position_parked(arm):
    q0 = np.array([1.39, -1.14, -1.82])
    _, ee = fk(arm, q0)
    traj = still_traj(q0, T=5.0)
    assert cost_position(traj, ee.position, arm) == pytest.approx(0.0, abs=1e-18)
    d = 0.37
    assert cost_position(traj, ee.position + np.array([d, 0, 0]), arm) == pytest.approx(d**2 * 5.0, rel=1e-9)


def test_cost_orientation_identical_zero(arm):
    q0 = np.array([1.39, -1.14, -1.82])
    _, ee = fk(arm, q0)
    traj = still_traj(q0)
    assert cost_orientation(traj, ee.orientation, arm) == pytest.approx(0.0, abs=1e-12)
    # double cover: -q is the same rotation
    assert cost_orientation(traj, -np.asarray(ee.orientation), arm) == pytest.approx(0.0, abs=1e-12)


def test_cost_upvector_constant_tilt(arm):
    q0 = np.array([1.39, -1.14, -1.82])
    _, ee = fk(arm, q0)
    traj = still_traj(q0, T=5.0)
    # rotate the target 90 degrees away from the current up vector
    up = ee.up_vector
    perp = np.cross(up, [0, 1, 0])
    perp /= np.linalg.norm(perp)
    assert cost_upvector(traj, perp, arm) == pytest.approx((np.pi / 2) ** 2 * 5.0, rel=1e-6)


def test_cost_speed_stationary(arm):
    q0 = np.array([1.39, -1.14, -1.82])
    traj = still_traj(q0, T=5.0)
    assert cost_speed(traj, np.zeros(3), arm) == pytest.approx(0.0, abs=1e-18)
    s = 0.4
    assert cost_speed(traj, np.array([0, 0, s]), arm) == pytest.approx(s**2 * 5.0, rel=1e-9)


def test_cost_repulsion_parked(arm):
    q0 = np.array([1.39, -1.14, -1.82])
    _, ee = fk(arm, q0)
    traj = still_traj(q0, T=5.0)
    assert cost_repulsion(traj, ee.position, 10.0, arm) == pytest.approx(5.0, rel=1e-9)
    d = 0.3
    src = ee.position + np.array([0, 0, d])
    assert cost_repulsion(traj, src, 10.0, arm) == pytest.approx(np.exp(-10 * d) * 5.0, rel=1e-6)
    # steep falloff vanishes at distance
    assert cost_repulsion(traj, src, 200.0, arm) <= 1e-12


def test_quadrature_refinement_within_5pct(arm, pickup_problem):
    problem, _ = pickup_problem
    traj = seeded_traj(arm, 7)
    env = problem.env
    terms = {
        "collision": lambda s: cost_collision(traj, env, arm, samples=s),
        "position": lambda s: cost_position(traj, (0.6, 0, 0.8), arm, samples=s),
        "orientation": lambda s: cost_orientation(traj, (1, 0, 0, 0), arm, samples=s),
        "upvector": lambda s: cost_upvector(traj, (0, 0, 1), arm, samples=s),
        "speed": lambda s: cost_speed(traj, (0.1, 0, 0), arm, samples=s),
        "repulsion": lambda s: cost_repulsion(traj, (0.6, 0, 0.8), 10.0, arm, samples=s),
    }
    for name, f in terms.items():
        coarse, fine = f(10), f(1000)
        assert abs(coarse - fine) <= 0.05 * max(abs(fine), 1e-12), name


def test_total_cost_breakdown_consistency(arm, pickup_problem):
    problem, _ = pickup_problem
    traj = seeded_traj(arm, 9)
    bd = total_cost(problem, traj)
    assert bd.total == pytest.approx(float(np.sum(bd.weighted)), abs=1e-9)
    # each weighted entry is weight * raw
    for t, raw, w in zip(problem.terms, bd.raw, bd.weighted):
        assert w == pytest.approx(t.weight * raw, rel=1e-12)
    # doubling weights doubles the total
    doubled = PlanningProblem(
        terms=tuple(CostTerm(kind=t.kind, weight=2 * t.weight, params=t.params) for t in problem.terms),
        arm=problem.arm, env=problem.env, start=problem.start,
        ignored_object_ids=problem.ignored_object_ids,
    )
    assert total_cost(doubled, traj).total == pytest.approx(2 * bd.total, rel=1e-12)
    # matches independent per-term evaluation
    ref = (
        3.0 * cost_collision(traj, problem.env, arm, obstacles=problem.obstacles)
        + 1.0 * cost_smoothness(traj)
        + 10.0 * cost_position(traj, problem.term("position").param("target"), arm)
        + 30.0 * cost_upvector(traj, (0, 0, 1), arm)
    )
    assert bd.total == pytest.approx(ref, rel=1e-9)


def test_compiled_kernel_matches_reference(arm, pickup_problem):
    problem, _ = pickup_problem
    terms = problem.terms + (
        CostTerm.make("orientation", 1.0, target=(1, 0, 0, 0)),
        CostTerm.make("speed", 1.0, target=(0.1, 0, 0)),
        CostTerm.make("repulsion", 3.0, source=(0.6, 0, 0.8), c=10.0),
    )
    rng = np.random.default_rng(2)
    R = 64
    q0 = rng.uniform(-1.5, 1.5, (R, arm.dof))
    q1 = q0 + rng.uniform(-0.4, 0.4, (R, arm.dof))
    dq0 = rng.uniform(-1, 1, (R, arm.dof))
    dq1 = rng.uniform(-1, 1, (R, arm.dof))
    h = np.full(R, 0.55)
    kc = SegmentKernel(arm, problem.obstacles, terms, compiled=True)
    kn = SegmentKernel(arm, problem.obstacles, terms, compiled=False)
    a = kc.term_costs(q0, dq0, q1, dq1, h)
    b = kn.term_costs(q0, dq0, q1, dq1, h)
    assert np.allclose(a, b, rtol=1e-9, atol=1e-12)


# --- optimizer gradient vs central differences -----------------------------


def test_optimizer_gradient_matches_tighter_fd(arm, pickup_problem):
    """The segment-local estimate equals a plain central difference of
    the full objective taken at a tighter step.

    Error is measured relative to the gradient magnitude floored at 1:
    the collision integrand is C1 but not C2 at contact onsets, so
    tiny components near an onset carry an irreducible O(h * curvature
    jump) absolute difference between step sizes."""
    problem, _ = pickup_problem
    opts = OptimizeOptions()
    rng = np.random.default_rng(4)
    base = optimize(problem, canonical_init(problem, seed=2), OptimizeOptions(max_iter=40)).trajectory
    kern = kernel_for(problem, opts.samples)
    times = _uniform_times(problem)

    def full_cost(Q, dQ):
        return float(kern.weighted_total(Q[:-1], dQ[:-1], Q[1:], dQ[1:], np.diff(times)).sum())

    checked = 0
    for trial in range(4):
        q = base.q + rng.normal(0, 0.04, base.q.shape)
        dq = base.dq + rng.normal(0, 0.04, base.dq.shape)
        q[0], dq[0] = base.q[0], base.dq[0]
        batch = _Batch(problem, q[None], dq[None], times, opts)
        gq, gdq, _, _ = batch.gradient(np.array([0]))
        for _ in range(25):
            j = int(rng.integers(1, base.n_waypoints))
            k = int(rng.integers(arm.dof))
            use_dq = bool(rng.integers(2))
            h = 2e-6
            Qp, dQp = batch.Q[0].copy(), batch.dQ[0].copy()
            Qm, dQm = batch.Q[0].copy(), batch.dQ[0].copy()
            if use_dq:
                dQp[j, k] += h
                dQm[j, k] -= h
                mine = gdq[0, j - 1, k]
            else:
                Qp[j, k] += h
                Qm[j, k] -= h
                mine = gq[0, j - 1, k]
            fd = (full_cost(Qp, dQp) - full_cost(Qm, dQm)) / (2 * h)
            denom = max(abs(fd), abs(mine), 1.0)
            assert abs(fd - mine) / denom <= 1e-4, (trial, j, k, use_dq, fd, mine)
            checked += 1
    assert checked == 100


# --- optimize / plan -------------------------------------------------------


def test_optimize_stationary_point_stays(arm):
    env = Environment(())
    q0 = np.array([1.0, -0.8, -0.9])
    _, ee = fk(arm, q0)
    problem = PlanningProblem(
        terms=(CostTerm.make("position", 1.0, target=ee.position),),
        arm=arm, env=env, start=RobotState(q0, np.zeros(3)),
    )
    init = still_traj(q0, T=5.0, n=10)
    res = optimize(problem, init)
    assert res.breakdown.total <= 1e-6
    assert np.max(np.abs(res.trajectory.q - q0)) < 0.05


def test_optimize_cost_trace_non_increasing(arm, pickup_problem):
    problem, _ = pickup_problem
    init = canonical_init(problem, seed=1)
    res = optimize(problem, init)
    t = res.cost_trace
    assert all(t[i + 1] <= t[i] + 1e-12 for i in range(len(t) - 1))
    assert t[-1] <= t[0]


def test_optimize_respects_limits_and_start(arm, pickup_problem):
    problem, _ = pickup_problem
    init = canonical_init(problem, seed=3)
    res = optimize(problem, init)
    traj = res.trajectory
    assert np.array_equal(traj.q[0], problem.start.joint_angles)
    assert np.array_equal(traj.dq[0], problem.start.joint_velocities)
    assert np.all(traj.q >= arm.q_min - 1e-12) and np.all(traj.q <= arm.q_max + 1e-12)
    assert np.all(traj.dq >= arm.dq_min - 1e-12) and np.all(traj.dq <= arm.dq_max + 1e-12)


def test_plan_reaches_target_collision_free(arm, pickup_problem):
    problem, target = pickup_problem
    res = plan(problem, restarts=8, seed=42)
    _, ee = fk(arm, res.trajectory.q[-1])
    assert np.linalg.norm(ee.position - target.position) <= 0.02
    assert sampled_max_penetration(problem, res.trajectory) <= 0.0


def test_plan_deterministic(arm, pickup_problem):
    problem, _ = pickup_problem
    a = plan(problem, restarts=4, seed=7)
    b = plan(problem, restarts=4, seed=7)
    assert np.array_equal(a.trajectory.q, b.trajectory.q)
    assert np.array_equal(a.trajectory.dq, b.trajectory.dq)


def test_plan_single_restart_equals_optimize(arm, pickup_problem):
    problem, _ = pickup_problem
    res_plan = plan(problem, restarts=1, seed=5)
    res_opt = optimize(problem, canonical_init(problem, seed=5))
    assert np.allclose(res_plan.trajectory.q, res_opt.trajectory.q, atol=1e-12)
    assert np.allclose(res_plan.trajectory.dq, res_opt.trajectory.dq, atol=1e-12)


def test_plan_requires_restarts(arm, pickup_problem):
    problem, _ = pickup_problem
    with pytest.raises(ValueError):
        plan(problem, restarts=0)


# --- metrics ---------------------------------------------------------------


def test_metrics_stationary(arm):
    traj = still_traj([0.2, 0.1, -0.4], T=5.0)
    d, s = trajectory_metrics(traj)
    assert d == 5.0 and s == 0.0


def test_metrics_constant_rate():
    T, rate = 4.0, 0.25
    W = 5
    times = np.linspace(0, T, W)
    q = (times * rate)[:, None]
    traj = Trajectory(q=q, dq=np.full((W, 1), rate), times=times)
    d, s = trajectory_metrics(traj)
    delta = rate * T
    assert d == T
    assert s == pytest.approx(delta**2 / T**2, rel=1e-12)


def test_metrics_time_rescaling():
    rng = np.random.default_rng(0)
    W = 6
    q = np.cumsum(rng.uniform(-0.3, 0.3, (W, 2)), axis=0)
    dq = rng.uniform(-0.4, 0.4, (W, 2))
    t1 = np.linspace(0, 3.0, W)
    a = Trajectory(q=q, dq=dq, times=t1)
    b = Trajectory(q=q, dq=dq / 2.0, times=2 * t1)
    _, sa = trajectory_metrics(a)
    _, sb = trajectory_metrics(b)
    assert sb == pytest.approx(sa / 4.0, rel=1e-9)
