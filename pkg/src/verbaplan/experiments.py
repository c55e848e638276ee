"""Desk-scale experiment helpers: corpus-size sweeps and episode runs.

An episode generates a fresh pickup scene, issues one color-pickup
command against a trained model, plays the plan out, and scores task
success: completion at the horizon, no true penetration along the way,
and the gripper ending on an object of the commanded color.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datagen import default_arm, gen_environment, generate_corpus
from .errors import PlanningFailure, VerbaplanError
from .kinematics import fk
from .planning import sampled_max_penetration
from .session import Session
from .training import train_model

EPISODE_COMMANDS = (
    "pick up one of the {color} objects",
    "pick up the nearest {color} object",
    "grab the {color} one",
    "take one of the {color} ones",
)


@dataclass
class EpisodeResult:
    command: str
    success: bool
    reason: str
    duration: float = 0.0
    smoothness: float = 0.0


def run_pickup_episode(model, arm, env_seed: int, ep_seed: int, restarts: int = 8, dt: float = 0.05) -> EpisodeResult:
    env, state, scene = gen_environment(env_seed, "pickup", arm)
    rng = np.random.default_rng(ep_seed)
    color = str(rng.choice(["blue", "red"]))
    command = str(rng.choice(EPISODE_COMMANDS)).format(color=color)
    session = Session(arm=arm, env=env, model=model, state=state, restarts=restarts, seed=ep_seed)
    try:
        out = session.submit_command(command)
    except (PlanningFailure, VerbaplanError) as e:
        return EpisodeResult(command=command, success=False, reason=f"{type(e).__name__}: {e}")
    if sampled_max_penetration(out.problem, out.trajectory) > 0:
        return EpisodeResult(command=command, success=False, reason="colliding trajectory")
    session.run_to_completion(dt=dt)
    if not session.episodes or not session.episodes[-1].success:
        reason = session.episodes[-1].failure_reason if session.episodes else "never completed"
        return EpisodeResult(command=command, success=False, reason=reason)
    _, ee = fk(arm, session.state.joint_angles)
    colored = [o for o in env.objects if o.color == color]
    dmin = min(float(np.linalg.norm(ee.position - o.position)) for o in colored)
    ep = session.episodes[-1]
    if dmin > 0.02:
        return EpisodeResult(command=command, success=False, reason=f"ended {dmin:.3f} m from nearest {color} object", duration=ep.duration, smoothness=ep.smoothness)
    return EpisodeResult(command=command, success=True, reason="ok", duration=ep.duration, smoothness=ep.smoothness)


@dataclass
class SweepRow:
    corpus_size: int
    successes: int
    episodes: int
    mean_duration: float
    mean_smoothness: float
    results: list = field(default_factory=list)

    @property
    def rate(self) -> float:
        return self.successes / self.episodes


def train_on_corpus(n: int, seed: int, scenario: str = "pickup", arm=None, reg: float = 1e-4):
    arm = arm or default_arm()
    corpus = generate_corpus(n, seed=seed, scenario=scenario, arm=arm)
    return train_model(corpus, arm=arm, reg=reg, seed=seed)


def run_sweep(corpus_sizes=(1000, 10000), episodes: int = 10, seed: int = 0, arm=None, restarts: int = 8):
    """Train one model per corpus size and run pickup episodes on each.

    Scene seeds are shared across corpus sizes so the comparison
    isolates the model."""
    arm = arm or default_arm()
    rows = []
    for n in corpus_sizes:
        model = train_on_corpus(n, seed=seed, arm=arm)
        results = [
            run_pickup_episode(model, arm, env_seed=seed * 10_000 + 100 + k, ep_seed=seed * 777 + k, restarts=restarts)
            for k in range(episodes)
        ]
        done = [r for r in results if r.success]
        rows.append(
            SweepRow(
                corpus_size=n,
                successes=len(done),
                episodes=episodes,
                mean_duration=float(np.mean([r.duration for r in done])) if done else float("nan"),
                mean_smoothness=float(np.mean([r.smoothness for r in done])) if done else float("nan"),
                results=results,
            )
        )
    return rows
