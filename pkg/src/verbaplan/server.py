"""HTTP/JSON surface over sessions, plus the console's state payload.

The state payload carries everything a dumb client needs to render:
world-frame arm link segments, object boxes, the end-effector polyline
of the current trajectory, repulsion sources, clock, status, and cost
breakdown. No client-side computation beyond drawing.
"""
from __future__ import annotations

import os
import pathlib
import threading

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .datagen import default_arm, gen_environment
from .dgg.model import load_model
from .errors import ParseFailure, PlanningFailure, UnresolvedReference, VerbaplanError
from .kinematics import capsule_world_segments, fk, load_arm
from .mapping import PlanningProblem
from .planning import interpolate, total_cost
from .session import Session
from .world import environment_from_dict, environment_to_dict, RobotState

MODEL_ENV_VAR = "VERBAPLAN_MODEL"


class CreateSession(BaseModel):
    scenario: str | None = None
    seed: int = 0
    arm: str | None = None
    arm_path: str | None = None
    model_path: str | None = None
    environment: dict | None = None
    restarts: int = 4


class CommandBody(BaseModel):
    text: str


class TickBody(BaseModel):
    dt: float


def _ee_polyline(session: Session, n: int = 60):
    traj = session.current_traj
    if traj is None:
        return []
    ts = np.linspace(0.0, traj.duration, n)
    pts = []
    for t in ts:
        q, _ = interpolate(traj, t)
        _, ee = fk(session.arm, q)
        pts.append([float(x) for x in ee.position])
    return pts


def _arm_segments(session: Session):
    P0, P1, radii = capsule_world_segments(session.arm, session.state.joint_angles)
    return [
        {"p0": [float(x) for x in P0[k]], "p1": [float(x) for x in P1[k]], "radius": float(radii[k])}
        for k in range(len(radii))
    ]


def _grounding_tree(session: Session):
    if session.last_tree is None or session.last_assignment is None:
        return None
    return [
        {
            "id": nid,
            "text": session.last_tree.node(nid).text,
            "pos_tag": session.last_tree.node(nid).pos_tag,
            "children": list(session.last_tree.node(nid).children),
            "grounding": session.last_assignment[nid].to_string(),
        }
        for nid in session.last_tree.bfs_ids()
    ]


def state_payload(session: Session) -> dict:
    problem: PlanningProblem | None = session.active_problem
    breakdown = None
    if problem is not None and session.current_traj is not None:
        breakdown = total_cost(problem, session.current_traj).to_dict()
    _, ee = fk(session.arm, session.state.joint_angles)
    return {
        "session": session.id,
        "status": session.status,
        "exec_clock": session.exec_clock,
        "sim_time": session.sim_time,
        "robot_state": {
            "q": [float(x) for x in session.state.joint_angles],
            "dq": [float(x) for x in session.state.joint_velocities],
            "ee_position": [float(x) for x in ee.position],
        },
        "arm_segments": _arm_segments(session),
        "environment": environment_to_dict(session.env),
        "trajectory": session.current_traj.to_dict() if session.current_traj is not None else None,
        "ee_path": _ee_polyline(session),
        "problem": problem.to_dict() if problem is not None else None,
        "cost_breakdown": breakdown,
        "grounding_tree": _grounding_tree(session),
        "episodes": [
            {"commands": e.commands, "success": e.success, "duration": e.duration, "smoothness": e.smoothness}
            for e in session.episodes
        ],
    }


def create_app(model_path=None, console_dir=None) -> FastAPI:
    app = FastAPI(title="verbaplan")
    sessions: dict[int, Session] = {}
    registry_lock = threading.Lock()
    default_model_path = model_path or os.environ.get(MODEL_ENV_VAR)

    def get_session(sid: int) -> Session:
        s = sessions.get(sid)
        if s is None:
            raise HTTPException(status_code=404, detail=f"no session {sid}")
        return s

    @app.get("/healthz")
    def healthz():
        return {"ok": True, "sessions": len(sessions)}

    @app.post("/sessions")
    def create_session(body: CreateSession):
        path = body.model_path or default_model_path
        if path is None:
            raise HTTPException(status_code=422, detail=f"no model: pass model_path or set {MODEL_ENV_VAR}")
        try:
            model = load_model(path)
        except VerbaplanError as e:
            raise HTTPException(status_code=422, detail=str(e))
        arm = load_arm(body.arm_path) if body.arm_path else default_arm(body.arm or "planar3")
        if body.environment is not None:
            env = environment_from_dict(body.environment)
            state = RobotState(np.zeros(arm.dof), np.zeros(arm.dof))
        else:
            env, state, _ = gen_environment(body.seed, body.scenario or "laptop", arm)
        session = Session(arm=arm, env=env, model=model, state=state, restarts=body.restarts, seed=body.seed)
        with registry_lock:
            sessions[session.id] = session
        return {"id": session.id}

    @app.post("/sessions/{sid}/command")
    def command(sid: int, body: CommandBody):
        session = get_session(sid)
        try:
            out = session.submit_command(body.text)
        except ParseFailure as e:
            raise HTTPException(status_code=422, detail=f"parse failure: {e}")
        except UnresolvedReference as e:
            raise HTTPException(status_code=422, detail=str(e))
        except PlanningFailure as e:
            raise HTTPException(status_code=409, detail=str(e))
        return {
            "groundings": _grounding_tree(session),
            "logscore": out.logscore,
            "problem": out.problem.to_dict(),
            "trajectory": out.trajectory.to_dict() if out.trajectory is not None else None,
        }

    @app.get("/sessions/{sid}/state")
    def get_state(sid: int):
        return state_payload(get_session(sid))

    @app.post("/sessions/{sid}/tick")
    def tick(sid: int, body: TickBody):
        session = get_session(sid)
        session.tick(body.dt)
        return {"exec_clock": session.exec_clock, "status": session.status}

    @app.post("/sessions/{sid}/reset")
    def reset(sid: int):
        get_session(sid).reset()
        return {"ok": True}

    console = console_dir or pathlib.Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if pathlib.Path(console).is_dir():
        app.mount("/console", StaticFiles(directory=str(console), html=True), name="console")
    return app
