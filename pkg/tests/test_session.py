import json

import numpy as np
import pytest

from verbaplan.datagen import gen_environment, generate_corpus
from verbaplan.dgg.model import DGGModel, load_model, save_model
from verbaplan.errors import EmptyLog, IntegrityError, SchemaMismatch, UnresolvedReference
from verbaplan.planning import interpolate
from verbaplan.session import EpisodeRecord, Session, evaluate, submit_command, tick
from verbaplan.training import train_model


@pytest.fixture(scope="module")
def pickup_model(arm):
    return train_model(generate_corpus(400, seed=31, scenario="pickup", arm=arm), arm=arm)


@pytest.fixture(scope="module")
def laptop_model(arm):
    return train_model(generate_corpus(400, seed=33, scenario="laptop", arm=arm), arm=arm)


def make_session(arm, model, scenario, seed=3, **kw):
    env, state, scene = gen_environment(seed, scenario, arm)
    return Session(arm=arm, env=env, model=model, state=state, restarts=8, seed=seed, **kw), scene


def test_submit_pick_command_executes(arm, pickup_model):
    session, scene = make_session(arm, pickup_model, "pickup")
    out = session.submit_command("pick up one of the blue objects")
    assert session.status == "executing"
    assert out.trajectory is not None
    assert {g.kind for g in out.assignment.values()} >= {"command", "color"}
    target = out.problem.term("position").param("target")
    blues = [o for o in session.env.objects if o.color == "blue"]
    assert min(np.linalg.norm(target - o.position) for o in blues) < 1e-9


def test_tick_zero_is_identity(arm, pickup_model):
    session, _ = make_session(arm, pickup_model, "pickup")
    session.submit_command("pick up one of the blue objects")
    q0 = session.state.joint_angles.copy()
    clock0 = session.exec_clock
    tick(session, 0.0)
    assert session.exec_clock == clock0
    assert np.array_equal(session.state.joint_angles, q0)


def test_ticks_additive(arm, pickup_model):
    a, _ = make_session(arm, pickup_model, "pickup")
    b, _ = make_session(arm, pickup_model, "pickup")
    a.submit_command("pick up one of the blue objects")
    b.submit_command("pick up one of the blue objects")
    a.tick(0.4)
    b.tick(0.2)
    b.tick(0.2)
    assert a.exec_clock == pytest.approx(b.exec_clock, abs=1e-12)
    assert np.allclose(a.state.joint_angles, b.state.joint_angles, atol=1e-12)


def test_completion_records_success(arm, pickup_model):
    session, _ = make_session(arm, pickup_model, "pickup")
    session.submit_command("pick up one of the blue objects")
    session.run_to_completion(dt=0.05)
    assert session.status == "idle"
    assert len(session.episodes) == 1
    assert session.episodes[0].success, session.episodes[0].failure_reason


def test_unresolved_pronoun_on_fresh_session(arm, pickup_model):
    session, _ = make_session(arm, pickup_model, "pickup")
    with pytest.raises(UnresolvedReference):
        session.submit_command("pick it up")


def test_stop_freezes_at_interpolated_config(arm, pickup_model):
    session, _ = make_session(arm, pickup_model, "pickup")
    out = session.submit_command("pick up one of the blue objects")
    traj = out.trajectory
    for _ in range(20):
        session.tick(0.05)
    frozen_clock = session.exec_clock
    q_expect, dq_expect = interpolate(traj, frozen_clock)
    session.submit_command("stop")
    assert session.status == "stopped"
    assert np.array_equal(session.state.joint_angles, q_expect)
    assert session.current_traj is None
    # and the merged problem dropped the goal terms
    assert session.active_problem.term("position") is None


def test_replanning_continuity_exact(arm, laptop_model):
    session, scene = make_session(arm, laptop_model, "laptop", seed=77)
    session.bindings["held"] = scene["held"]
    session.bindings["it"] = scene["held"]
    out1 = session.submit_command("put the cube on the table")
    for _ in range(24):
        session.tick(0.05)
    q_int, dq_int = interpolate(out1.trajectory, session.exec_clock)
    out2 = session.submit_command("don't put it there")
    assert np.array_equal(out2.trajectory.q[0], q_int)
    assert np.array_equal(out2.trajectory.dq[0], dq_int)
    kinds = [t.kind for t in out2.problem.terms]
    assert "repulsion" in kinds


def test_negation_adds_repulsion_at_bound_target(arm, laptop_model):
    session, scene = make_session(arm, laptop_model, "laptop", seed=78)
    session.bindings["held"] = scene["held"]
    session.bindings["it"] = scene["held"]
    out1 = session.submit_command("put the cube on the table")
    old_target = out1.problem.term("position").param("target")
    for _ in range(24):
        session.tick(0.05)
    out2 = session.submit_command("don't put it there")
    src = out2.problem.terms_of("repulsion")[0].param("source")
    assert np.allclose(src, old_target, atol=1e-12)
    new_target = out2.problem.term("position").param("target")
    assert np.linalg.norm(np.asarray(new_target) - np.asarray(old_target)) > 0.1


def test_evaluate_metrics():
    episodes = [EpisodeRecord(commands=["x"], success=True, duration=4.0, smoothness=0.5) for _ in range(10)]
    rate, dur, smooth = evaluate(episodes)
    assert rate == 1.0 and dur == 4.0 and smooth == 0.5
    episodes[0] = EpisodeRecord(commands=["x"], success=False, duration=4.0, smoothness=0.5)
    rate, _, _ = evaluate(episodes)
    assert rate == 0.9
    with pytest.raises(EmptyLog):
        evaluate([])


def test_submit_command_functional_wrapper(arm, pickup_model):
    session, _ = make_session(arm, pickup_model, "pickup")
    s2, problem, traj = submit_command(session, "pick up one of the red objects")
    assert s2 is session and traj is not None


# --- model persistence -----------------------------------------------------


def test_model_save_load_round_trip(arm, pickup_model, tmp_path):
    path = tmp_path / "model.json"
    save_model(pickup_model, path)
    loaded = load_model(path)
    assert loaded.vocab == pickup_model.vocab
    assert loaded.seeds == pickup_model.seeds
    assert set(loaded.templates) == set(pickup_model.templates)
    for sig in pickup_model.templates:
        assert np.array_equal(loaded.templates[sig], pickup_model.templates[sig])
    for key in pickup_model.gmm_head:
        assert np.array_equal(loaded.gmm_head[key].means, pickup_model.gmm_head[key].means)
        assert np.array_equal(loaded.gmm_head[key].weights, pickup_model.gmm_head[key].weights)
    # save -> load -> save is byte-identical
    path2 = tmp_path / "model2.json"
    save_model(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_model_corruption_detected(arm, pickup_model, tmp_path):
    path = tmp_path / "model.json"
    save_model(pickup_model, path)
    doc = json.loads(path.read_text())
    doc["payload"]["vocab"][0] = "tampered"
    path.write_text(json.dumps(doc))
    with pytest.raises(IntegrityError):
        load_model(path)
    path.write_text("{not json")
    with pytest.raises(IntegrityError):
        load_model(path)


def test_model_schema_mismatch(arm, pickup_model, tmp_path):
    import hashlib

    from verbaplan.dgg.model import _checksum, _payload

    path = tmp_path / "model.json"
    payload = _payload(pickup_model)
    payload["schema_version"] = "attr-v0-legacy"
    doc = {"payload": payload, "sha256": _checksum(payload)}
    path.write_text(json.dumps(doc))
    with pytest.raises(SchemaMismatch):
        load_model(path)


def test_inference_matches_after_reload(arm, pickup_model, tmp_path):
    from verbaplan.dgg.crf import infer
    from verbaplan.dgg.grounding import build_graph
    from verbaplan.parsing import parse_command

    path = tmp_path / "model.json"
    save_model(pickup_model, path)
    loaded = load_model(path)
    env, state, _ = gen_environment(55, "pickup", arm)
    tree = parse_command("pick up one of the blue objects")
    graph = build_graph(tree, env, state, arm)
    a1, H1, s1 = infer(pickup_model, graph)
    a2, H2, s2 = infer(loaded, graph)
    assert a1 == a2
    assert s1 == pytest.approx(s2, abs=1e-9)
