"""Grounding variants and candidate-domain construction.

A grounding is the real-world referent of one phrase node: a command,
an object or object set, a selection rule, a color, a spatial relation,
a negation marker, or a motion attribute. Every domain ends with a
catch-all Null so no node is left without candidates.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from ..parsing import ParseTree, PhraseNode
from ..world import COLORS, Environment, RobotState, environment_features, kind_from_noun

COMMAND_KINDS = ("pick_up", "place", "move", "stop", "insert")
SELECT_MODES = ("nearest", "leftmost", "rightmost")
LOCATION_RELS = ("on", "near", "left_of", "right_of", "robot_here", "towards")
VARIANTS = (
    "command",
    "object_ref",
    "object_set",
    "select",
    "color",
    "location",
    "negation",
    "direction",
    "distance",
    "speed",
    "null",
)

DIRECTIONS = {
    "left": (0.0, 1.0, 0.0),
    "right": (0.0, -1.0, 0.0),
    "up": (0.0, 0.0, 1.0),
    "down": (0.0, 0.0, -1.0),
    "forward": (1.0, 0.0, 0.0),
    "backward": (-1.0, 0.0, 0.0),
}

UNIT_FACTORS = {
    "cm": 0.01, "centimeter": 0.01, "centimeters": 0.01,
    "m": 1.0, "meter": 1.0, "meters": 1.0,
    "mm": 0.001,
    "inch": 0.0254, "inches": 0.0254, "in": 0.0254,
}

SPEED_SLOW = 0.1
SPEED_FAST = 0.6

# words that cue each grounding; drives the correspondence match features
CANONICAL_WORDS = {
    ("command", "pick_up"): ("pick", "grab", "take", "lift"),
    ("command", "place"): ("put", "place", "set", "drop"),
    ("command", "move"): ("move", "go", "push", "bring"),
    ("command", "stop"): ("stop", "halt"),
    ("command", "insert"): ("insert",),
    ("location", "on"): ("on", "onto", "above", "over"),
    ("location", "near"): ("near", "by", "at", "beside"),
    ("location", "towards"): ("towards", "toward", "to", "into"),
    ("location", "robot_here"): ("there", "here"),
    ("location", "left_of"): ("left",),
    ("location", "right_of"): ("right",),
    ("select", "nearest"): ("of", "nearest", "closest"),
    ("select", "leftmost"): ("leftmost",),
    ("select", "rightmost"): ("rightmost",),
    ("negation", None): ("don't", "not", "never", "no"),
    ("speed", SPEED_SLOW): ("slowly", "slow"),
    ("speed", SPEED_FAST): ("quickly", "fast"),
}
for _c in COLORS:
    CANONICAL_WORDS[("color", _c)] = (_c,)
for _w, _v in DIRECTIONS.items():
    CANONICAL_WORDS[("direction", _v)] = (_w,)

_GROUNDING_RE = re.compile(r"^(\w+)(?:\((.*)\))?$")


@dataclass(frozen=True)
class Grounding:
    kind: str
    value: object = None

    def __post_init__(self):
        if self.kind not in VARIANTS:
            raise ValueError(f"unknown grounding variant {self.kind!r}")

    # --- constructors ---
    @classmethod
    def command(cls, k):
        assert k in COMMAND_KINDS, k
        return cls("command", k)

    @classmethod
    def object_ref(cls, obj_id: int):
        return cls("object_ref", int(obj_id))

    @classmethod
    def object_set(cls, ids):
        return cls("object_set", tuple(sorted(int(i) for i in ids)))

    @classmethod
    def select(cls, mode):
        assert mode in SELECT_MODES, mode
        return cls("select", mode)

    @classmethod
    def color(cls, c):
        assert c in COLORS, c
        return cls("color", c)

    @classmethod
    def location(cls, rel):
        assert rel in LOCATION_RELS, rel
        return cls("location", rel)

    @classmethod
    def negation(cls):
        return cls("negation")

    @classmethod
    def direction(cls, vec):
        v = np.asarray(vec, dtype=float)
        v = v / np.linalg.norm(v)
        return cls("direction", tuple(float(x) for x in v))

    @classmethod
    def distance(cls, meters: float):
        if meters < 0:
            raise ValueError("distance must be non-negative")
        return cls("distance", float(meters))

    @classmethod
    def speed(cls, s: float):
        return cls("speed", float(s))

    @classmethod
    def null(cls):
        return cls("null")

    def to_string(self) -> str:
        name = {
            "command": "Command", "object_ref": "ObjectRef", "object_set": "ObjectSet",
            "select": "Select", "color": "Color", "location": "Location",
            "negation": "Negation", "direction": "Direction", "distance": "Distance",
            "speed": "Speed", "null": "Null",
        }[self.kind]
        if self.kind in ("negation", "null"):
            return name
        if self.kind == "object_set":
            return f"{name}({','.join(str(i) for i in self.value)})"
        if self.kind == "direction":
            return f"{name}({','.join(repr(x) for x in self.value)})"
        if self.kind in ("distance", "speed"):
            return f"{name}({self.value!r})"
        return f"{name}({self.value})"

    def __str__(self):
        return self.to_string()

    @property
    def canonical_words(self) -> tuple[str, ...]:
        return CANONICAL_WORDS.get((self.kind, self.value), ())


def grounding_from_string(s: str) -> Grounding:
    m = _GROUNDING_RE.match(s.strip())
    if not m:
        raise ValueError(f"bad grounding string {s!r}")
    name, arg = m.group(1), m.group(2)
    if name == "Negation":
        return Grounding.negation()
    if name == "Null":
        return Grounding.null()
    if name == "Command":
        return Grounding.command(arg)
    if name == "ObjectRef":
        return Grounding.object_ref(int(arg))
    if name == "ObjectSet":
        return Grounding.object_set(int(x) for x in arg.split(",") if x)
    if name == "Select":
        return Grounding.select(arg)
    if name == "Color":
        return Grounding.color(arg)
    if name == "Location":
        rel = {"robot": "robot_here"}.get(arg, arg)
        return Grounding.location(rel)
    if name == "Direction":
        return Grounding("direction", tuple(float(x) for x in arg.split(",")))
    if name == "Distance":
        return Grounding.distance(float(arg))
    if name == "Speed":
        return Grounding.speed(float(arg))
    raise ValueError(f"bad grounding string {s!r}")


@dataclass
class DGGraph:
    """Factor graph mirroring a parse tree over a bound environment."""

    tree: ParseTree
    env: Environment
    domains: dict[int, list[Grounding]]
    env_features: np.ndarray
    object_geometry: dict[int, np.ndarray]  # object id -> (dist, rank, rel xyz)
    context_tokens: tuple[str, ...] = field(default_factory=tuple)

    def node(self, nid: int) -> PhraseNode:
        return self.tree.node(nid)

    @property
    def node_ids(self) -> list[int]:
        return self.tree.bfs_ids()


def _phrase_distance_value(node: PhraseNode):
    toks = node.tokens
    for i, t in enumerate(toks):
        if re.match(r"^\d+(\.\d+)?$", t):
            for u in toks[i + 1 :]:
                if u in UNIT_FACTORS:
                    return float(t) * UNIT_FACTORS[u]
    return None


def _object_domains(env: Environment) -> list[Grounding]:
    cands = [Grounding.object_ref(o.id) for o in sorted(env.objects, key=lambda o: o.id)]
    sets = {tuple(sorted(o.id for o in env.objects))}
    movable = tuple(sorted(o.id for o in env.objects if o.kind != "table"))
    if movable:
        sets.add(movable)
    for c in COLORS:
        ids = tuple(sorted(o.id for o in env.objects if o.color == c))
        if ids:
            sets.add(ids)
    for ids in sorted(sets):
        cands.append(Grounding.object_set(ids))
    return cands


def candidate_domain(node: PhraseNode, env: Environment) -> list[Grounding]:
    """POS-driven candidate groundings, always ending with Null."""
    tag = node.pos_tag
    cands: list[Grounding] = []
    if tag == "VB":
        cands = [Grounding.command(k) for k in COMMAND_KINDS]
    elif tag == "VB-NEG":
        cands = [Grounding.negation()]
    elif tag in ("NN", "NP", "PRP", "DT-span"):
        cands = _object_domains(env)
    elif tag == "JJ":
        cands = [Grounding.color(c) for c in COLORS] + [Grounding.select(m) for m in SELECT_MODES]
    elif tag == "PP":
        cands = [Grounding.location(r) for r in LOCATION_RELS] + [Grounding.select(m) for m in SELECT_MODES]
    elif tag == "RB":
        dist = _phrase_distance_value(node)
        if dist is not None:
            cands = [Grounding.distance(dist)]
        else:
            cands = (
                [Grounding.location("robot_here")]
                + [Grounding("direction", v) for v in DIRECTIONS.values()]
                + [Grounding.speed(SPEED_SLOW), Grounding.speed(SPEED_FAST)]
            )
    cands.append(Grounding.null())
    return cands


def build_graph(tree: ParseTree, env: Environment, state: RobotState | None = None, arm=None) -> DGGraph:
    """One grounding variable per phrase node, domains by POS rules.

    When the robot state and arm are given, the environment feature
    block and per-object geometry (distance to end-effector, distance
    rank) are computed; otherwise geometric features fall back to the
    robot base at the origin.
    """
    if state is not None and arm is not None:
        from ..kinematics import fk

        _, ee = fk(arm, state.joint_angles)
        ref = ee.position
        env_feats = environment_features(env, state, arm)
    else:
        ref = np.zeros(3)
        from ..world import ENV_FEATURE_LEN

        env_feats = np.zeros(ENV_FEATURE_LEN)

    order = sorted(env.objects, key=lambda o: (float(np.linalg.norm(o.position - ref)), o.id))
    n = max(len(order), 1)
    geometry = {}
    for rank, o in enumerate(order):
        rel = o.position - ref
        geometry[o.id] = np.array([float(np.linalg.norm(rel)), rank / n, rel[0], rel[1], rel[2]])

    domains = {nid: candidate_domain(tree.node(nid), env) for nid in tree.bfs_ids()}
    return DGGraph(
        tree=tree,
        env=env,
        domains=domains,
        env_features=env_feats,
        object_geometry=geometry,
        context_tokens=tree.tokens,
    )
