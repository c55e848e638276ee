"""Environment representation: objects, attributes, robot state.

Objects are oriented boxes (half extents) with an enclosing-sphere
radius used as a fast collision pre-check. Attribute encodings are
binary slot vectors with a fixed layout per schema version; trained
models embed the version string so stale models are refused at load.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NoMatch
from .geometry import quat_normalize

SCHEMA_VERSION = "attr-v1"

OBJECT_KINDS = ("cup", "table", "book", "laptop", "block", "can", "box", "hole", "human")
COLORS = ("red", "blue", "green")

# nouns appearing in commands, normalized to a schema kind
KIND_SYNONYMS = {
    "cube": "block",
    "cubes": "block",
    "blocks": "block",
    "cups": "cup",
    "books": "book",
    "cans": "can",
    "boxes": "box",
    "objects": None,  # generic plural, matches any kind
    "object": None,
    "one": None,
    "ones": None,
}

ATTRIBUTE_SLOTS = tuple(f"kind:{k}" for k in OBJECT_KINDS) + tuple(f"color:{c}" for c in COLORS)

MAX_FEATURE_OBJECTS = 8
MAX_FEATURE_DOF = 8


def kind_from_noun(noun: str):
    """Map a command noun to a schema kind, or None for generic nouns."""
    noun = noun.lower()
    if noun in OBJECT_KINDS:
        return noun
    if noun in KIND_SYNONYMS:
        return KIND_SYNONYMS[noun]
    if noun.endswith("s") and noun[:-1] in OBJECT_KINDS:
        return noun[:-1]
    return None


@dataclass(frozen=True)
class ObjectEntity:
    id: int
    kind: str
    position: np.ndarray  # (3,) meters
    orientation: np.ndarray  # (4,) unit quaternion, wxyz
    half_extents: np.ndarray  # (3,) meters, > 0
    color: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "orientation", quat_normalize(self.orientation))
        he = np.asarray(self.half_extents, dtype=float)
        if np.any(he <= 0):
            raise ValueError(f"half_extents must be positive, got {he}")
        object.__setattr__(self, "half_extents", he)
        if self.kind not in OBJECT_KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.color not in COLORS and self.color != "none":
            raise ValueError(f"unknown color {self.color!r}")

    @property
    def bounding_radius(self) -> float:
        return float(np.linalg.norm(self.half_extents))

    @property
    def top_z(self) -> float:
        # conservative for rotated boxes; exact for upright ones
        return float(self.position[2] + abs(self.half_extents[2]))


@dataclass(frozen=True)
class Environment:
    objects: tuple[ObjectEntity, ...]
    obstacle_ids: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "obstacle_ids", frozenset(self.obstacle_ids))
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError("object ids must be unique")
        missing = self.obstacle_ids - set(ids)
        if missing:
            raise ValueError(f"obstacle ids {sorted(missing)} missing from objects")

    def get(self, obj_id: int) -> ObjectEntity:
        for o in self.objects:
            if o.id == obj_id:
                return o
        raise KeyError(obj_id)

    @property
    def obstacles(self) -> tuple[ObjectEntity, ...]:
        return tuple(o for o in self.objects if o.id in self.obstacle_ids)

    def with_object_moved(self, obj_id: int, position) -> "Environment":
        objs = tuple(
            replace(o, position=np.asarray(position, dtype=float)) if o.id == obj_id else o
            for o in self.objects
        )
        return Environment(objs, self.obstacle_ids)


@dataclass(frozen=True)
class RobotState:
    joint_angles: np.ndarray
    joint_velocities: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        q = np.asarray(self.joint_angles, dtype=float)
        dq = np.asarray(self.joint_velocities, dtype=float)
        if q.shape != dq.shape:
            raise ValueError("joint angle and velocity lengths differ")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(dq))):
            raise ValueError("robot state must be finite")
        object.__setattr__(self, "joint_angles", q)
        object.__setattr__(self, "joint_velocities", dq)


def attribute_vector(obj: ObjectEntity) -> np.ndarray:
    """Fixed-length 0/1 encoding of (kind, color); injective on pairs."""
    v = np.zeros(len(ATTRIBUTE_SLOTS))
    v[OBJECT_KINDS.index(obj.kind)] = 1.0
    if obj.color in COLORS:
        v[len(OBJECT_KINDS) + COLORS.index(obj.color)] = 1.0
    return v


def select_objects(env: Environment, color=None, kind=None, selector="all", reference=None):
    """Filter objects by color/kind, then order by selector.

    `nearest` sorts by Euclidean distance to `reference`; `leftmost`
    takes the largest y (robot at origin facing +x), `rightmost` the
    smallest. Ties break toward the lower id. Returns object ids; for
    point selectors only the winner is returned.
    """
    if not env.objects:
        raise NoMatch("environment is empty")
    cands = [o for o in env.objects if (color is None or o.color == color) and (kind is None or o.kind == kind)]
    if not cands:
        raise NoMatch(f"no object with color={color!r} kind={kind!r}")
    if selector == "all":
        return [o.id for o in sorted(cands, key=lambda o: o.id)]
    if selector == "nearest":
        if reference is None:
            raise ValueError("nearest selector needs a reference point")
        ref = np.asarray(reference, dtype=float)
        best = min(cands, key=lambda o: (float(np.linalg.norm(o.position - ref)), o.id))
        return [best.id]
    if selector == "leftmost":
        best = max(cands, key=lambda o: (o.position[1], -o.id))
        return [best.id]
    if selector == "rightmost":
        best = min(cands, key=lambda o: (o.position[1], o.id))
        return [best.id]
    raise ValueError(f"unknown selector {selector!r}")


def environment_features(env: Environment, state: RobotState, arm) -> np.ndarray:
    """Fixed-length scene summary consumed by the grounding features.

    Per-object blocks (attributes + position), objects sorted by
    distance to the end-effector then id, capped and zero-padded;
    followed by a robot block (end-effector position, padded joint
    angles and velocities). Length depends only on the schema.
    """
    from .kinematics import fk  # local import to avoid cycle

    _, ee = fk(arm, state.joint_angles)
    order = sorted(env.objects, key=lambda o: (float(np.linalg.norm(o.position - ee.position)), o.id))
    block_len = len(ATTRIBUTE_SLOTS) + 3
    obj_block = np.zeros(MAX_FEATURE_OBJECTS * block_len)
    for i, o in enumerate(order[:MAX_FEATURE_OBJECTS]):
        obj_block[i * block_len : (i + 1) * block_len] = np.concatenate([attribute_vector(o), o.position])
    qpad = np.zeros(MAX_FEATURE_DOF)
    dqpad = np.zeros(MAX_FEATURE_DOF)
    n = min(len(state.joint_angles), MAX_FEATURE_DOF)
    qpad[:n] = state.joint_angles[:n]
    dqpad[:n] = state.joint_velocities[:n]
    return np.concatenate([obj_block, ee.position, qpad, dqpad])


ENV_FEATURE_LEN = MAX_FEATURE_OBJECTS * (len(ATTRIBUTE_SLOTS) + 3) + 3 + 2 * MAX_FEATURE_DOF


def environment_to_dict(env: Environment) -> dict:
    return {
        "objects": [
            {
                "id": o.id,
                "kind": o.kind,
                "position": list(map(float, o.position)),
                "orientation": list(map(float, o.orientation)),
                "half_extents": list(map(float, o.half_extents)),
                "color": o.color,
            }
            for o in env.objects
        ],
        "obstacles": sorted(env.obstacle_ids),
    }


def environment_from_dict(data: dict) -> Environment:
    objs = tuple(
        ObjectEntity(
            id=int(d["id"]),
            kind=d["kind"],
            position=d["position"],
            orientation=d.get("orientation", [1, 0, 0, 0]),
            half_extents=d["half_extents"],
            color=d.get("color", "none"),
        )
        for d in data["objects"]
    )
    return Environment(objs, frozenset(int(i) for i in data.get("obstacles", [])))


def load_environment(path) -> Environment:
    with open(path) as f:
        return environment_from_dict(json.load(f))


def save_environment(env: Environment, path) -> None:
    with open(path, "w") as f:
        json.dump(environment_to_dict(env), f, indent=2, sort_keys=True)
