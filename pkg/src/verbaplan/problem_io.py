"""Planning-problem files: terms + scene + start state as JSON."""
from __future__ import annotations

import json

import numpy as np

from .datagen import default_arm
from .kinematics import arm_from_dict, arm_to_dict
from .mapping import CostTerm, PlanningProblem
from .world import RobotState, environment_from_dict, environment_to_dict


def problem_to_dict(problem: PlanningProblem) -> dict:
    d = problem.to_dict()
    d["arm"] = arm_to_dict(problem.arm)
    d["environment"] = environment_to_dict(problem.env)
    d["start"] = {
        "q": [float(x) for x in problem.start.joint_angles],
        "dq": [float(x) for x in problem.start.joint_velocities],
    }
    return d


def problem_from_dict(d: dict) -> PlanningProblem:
    arm = arm_from_dict(d["arm"]) if "arm" in d else default_arm(d.get("arm_name", "planar3"))
    env = environment_from_dict(d["environment"])
    start = RobotState(np.array(d["start"]["q"]), np.array(d["start"]["dq"]))
    terms = tuple(
        CostTerm.make(t["kind"], t["weight"], **{k: v for k, v in t.get("params", {}).items()})
        for t in d["terms"]
    )
    return PlanningProblem(
        terms=terms,
        arm=arm,
        env=env,
        start=start,
        horizon=float(d.get("horizon", 5.0)),
        n_waypoints=int(d.get("n_waypoints", 10)),
        stop=bool(d.get("stop", False)),
        ignored_object_ids=frozenset(d.get("ignored_object_ids", ())),
    )


def save_problem(problem: PlanningProblem, path) -> None:
    with open(path, "w") as f:
        json.dump(problem_to_dict(problem), f, indent=2, sort_keys=True)


def load_problem(path) -> PlanningProblem:
    with open(path) as f:
        return problem_from_dict(json.load(f))
