"""Interactive execution loop: live commands, replanning, playback.

A session owns one arm in one environment with one trained model.
Commands can arrive at any time: the current trajectory is interrupted
at the interpolated state, the new command is grounded and mapped, its
problem merged with the active one, and planning resumes exactly from
the interrupt state. Execution itself is kinematic playback of the
planned trajectory. Pronouns bind to recent referents: "it" to the last
commanded object, "there" to the last position target, "that one" to
the object nearest the current target.
"""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field

import numpy as np

from .dgg.crf import infer
from .dgg.grounding import Grounding, build_graph
from .dgg.model import DGGModel, load_model, save_model  # noqa: F401  (session-level API)
from .errors import EmptyLog, PlanningFailure, UnresolvedReference
from .kinematics import ArmModel, fk
from .mapping import PlanningProblem, map_problem, merge
from .parsing import GrammarSpec, parse, tokenize
from .planning import OptimizeOptions, Trajectory, interpolate, plan, trajectory_metrics
from .world import Environment, RobotState

COMPLETION_TOL = 0.02  # meters from the position target at horizon end

_session_counter = itertools.count(1)


@dataclass
class EpisodeRecord:
    commands: list[str]
    success: bool
    duration: float
    smoothness: float
    failure_reason: str = ""


@dataclass
class CommandOutcome:
    assignment: dict[int, Grounding]
    problem: PlanningProblem
    trajectory: Trajectory | None
    logscore: float


@dataclass
class Session:
    arm: ArmModel
    env: Environment
    model: DGGModel
    state: RobotState
    grammar: GrammarSpec | None = None
    restarts: int = 4
    seed: int = 0
    opts: OptimizeOptions = field(default_factory=OptimizeOptions)
    id: int = field(default_factory=lambda: next(_session_counter))

    def __post_init__(self):
        self.status = "idle"
        self.active_problem: PlanningProblem | None = None
        self.current_traj: Trajectory | None = None
        self.exec_clock = 0.0
        self.sim_time = 0.0
        self.bindings: dict = {}
        self.episodes: list[EpisodeRecord] = []
        self.episode_commands: list[str] = []
        self.episode_started = 0.0
        self.last_assignment: dict[int, Grounding] | None = None
        self.last_tree = None
        self.lock = threading.Lock()
        self.model.check_schema()
        self._plan_seed = self.seed

    # -- helpers -------------------------------------------------------
    def _interrupt_state(self) -> RobotState:
        if self.current_traj is not None and self.status == "executing":
            q, dq = interpolate(self.current_traj, self.exec_clock)
            return RobotState(q, dq, timestamp=self.sim_time)
        return self.state

    def _pronoun_nodes(self, tree):
        for nid in tree.bfs_ids():
            node = tree.node(nid)
            if node.text in ("it", "them"):
                yield nid, "it"
            elif node.text in ("that one", "this one"):
                yield nid, "that_one"
            elif node.text == "there":
                yield nid, "there"

    def _nearest_object_to_target(self):
        if self.active_problem is None:
            return None
        term = self.active_problem.term("position")
        if term is None:
            return None
        target = term.param("target")
        movable = [o for o in self.env.objects if o.kind != "table"]
        if not movable:
            return None
        return min(movable, key=lambda o: (float(np.linalg.norm(o.position - target)), o.id)).id

    def _update_bindings(self, tree, assignment, problem):
        if problem is not None:
            term = problem.term("position")
            if term is not None:
                self.bindings["there"] = tuple(float(x) for x in term.param("target"))
        for nid in tree.bfs_ids():
            g = assignment[nid]
            if g.kind == "command" and g.value in ("pick_up", "place", "move"):
                for cid in tree.node(nid).children:
                    cg = assignment[cid]
                    if cg.kind == "object_ref":
                        self.bindings["it"] = cg.value
                        if g.value == "pick_up":
                            self.bindings["held"] = cg.value
                        break
        colors = [g.value for g in assignment.values() if g.kind == "color"]
        selects = [g.value for g in assignment.values() if g.kind == "select"]
        if colors or selects:
            self.bindings["selection"] = {"color": colors[0] if colors else None, "selector": selects[0] if selects else "nearest"}

    # -- spec operations -------------------------------------------------
    def submit_command(self, text: str) -> CommandOutcome:
        with self.lock:
            return self._submit_locked(text)

    def _submit_locked(self, text: str) -> CommandOutcome:
        tree = parse(tokenize(text), self.grammar)
        pronouns = list(self._pronoun_nodes(tree))
        for _, kind in pronouns:
            if kind in ("it", "that_one") and "it" not in self.bindings and "held" not in self.bindings and self.active_problem is None:
                raise UnresolvedReference(f"no binding for pronoun in {text!r}")
        if not self.episode_commands:
            self.episode_started = self.sim_time
        self.episode_commands.append(text)

        start = self._interrupt_state()
        graph = build_graph(tree, self.env, start, self.arm)
        assignment, H, logscore = infer(self.model, graph)
        # contextual rebinding of pronouns
        for nid, kind in pronouns:
            if kind == "it" and ("it" in self.bindings or "held" in self.bindings):
                assignment[nid] = Grounding.object_ref(self.bindings.get("it", self.bindings.get("held")))
            elif kind == "that_one":
                obj = self._nearest_object_to_target()
                if obj is None:
                    obj = self.bindings.get("it")
                if obj is None:
                    raise UnresolvedReference("no target to bind 'that one' against")
                assignment[nid] = Grounding.object_ref(obj)
            elif kind == "there":
                assignment[nid] = Grounding.location("robot_here")

        problem = map_problem(graph, assignment, H, start, self.arm, bindings=self.bindings)
        merged = merge(self.active_problem, problem) if self.active_problem is not None else problem

        self.last_assignment = assignment
        self.last_tree = tree
        self.state = start

        if merged.stop:
            self.status = "stopped"
            self.active_problem = merged
            self.current_traj = None
            self.exec_clock = 0.0
            self._update_bindings(tree, assignment, None)
            return CommandOutcome(assignment=assignment, problem=merged, trajectory=None, logscore=logscore)

        try:
            result = plan(merged, restarts=self.restarts, seed=self._plan_seed, opts=self.opts)
        except PlanningFailure:
            self.status = "failed"
            self.active_problem = merged
            raise
        self._plan_seed += 1
        self.active_problem = merged
        self.current_traj = result.trajectory
        self.exec_clock = 0.0
        self.status = "executing"
        self._update_bindings(tree, assignment, merged)
        return CommandOutcome(assignment=assignment, problem=merged, trajectory=result.trajectory, logscore=logscore)

    def tick(self, dt: float) -> "Session":
        with self.lock:
            self.sim_time += dt
            if self.status != "executing" or self.current_traj is None:
                return self
            self.exec_clock = min(self.exec_clock + dt, self.current_traj.duration)
            q, dq = interpolate(self.current_traj, self.exec_clock)
            self.state = RobotState(q, dq, timestamp=self.sim_time)
            if self.exec_clock >= self.current_traj.duration:
                self._finish_episode()
            return self

    def _finish_episode(self):
        problem = self.active_problem
        success = True
        reason = ""
        if problem is not None:
            term = problem.term("position")
            if term is not None:
                _, ee = fk(self.arm, self.state.joint_angles)
                miss = float(np.linalg.norm(ee.position - term.param("target")))
                if miss > COMPLETION_TOL:
                    success, reason = False, f"target missed by {miss:.3f} m"
        duration = max(self.sim_time - self.episode_started, self.current_traj.duration)
        _, smooth_per_dur = trajectory_metrics(self.current_traj)
        self.episodes.append(
            EpisodeRecord(
                commands=list(self.episode_commands),
                success=success,
                duration=duration,
                smoothness=smooth_per_dur,
                failure_reason=reason,
            )
        )
        self.episode_commands = []
        self.status = "idle"

    def run_to_completion(self, dt: float = 0.02, max_time: float = 60.0):
        t = 0.0
        while self.status == "executing" and t < max_time:
            self.tick(dt)
            t += dt
        return self

    def reset(self, env: Environment | None = None, state: RobotState | None = None):
        with self.lock:
            if env is not None:
                self.env = env
            if state is not None:
                self.state = state
            self.status = "idle"
            self.active_problem = None
            self.current_traj = None
            self.exec_clock = 0.0
            self.bindings = {}
            self.episode_commands = []
            self.last_assignment = None
            self.last_tree = None
        return self


def submit_command(session: Session, text: str) -> tuple[Session, PlanningProblem, Trajectory | None]:
    out = session.submit_command(text)
    return session, out.problem, out.trajectory


def tick(session: Session, dt: float) -> Session:
    return session.tick(dt)


def evaluate(episodes: list[EpisodeRecord]):
    """(success rate, mean duration, mean smoothness cost) over episodes."""
    if not episodes:
        raise EmptyLog("no completed episodes")
    succ = [e for e in episodes if e.success]
    rate = len(succ) / len(episodes)
    mean_duration = float(np.mean([e.duration for e in episodes]))
    mean_smoothness = float(np.mean([e.smoothness for e in episodes]))
    return rate, mean_duration, mean_smoothness
