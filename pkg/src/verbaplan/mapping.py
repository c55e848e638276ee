"""Rule layer turning grounded commands plus latent parameters into a
concrete planning problem.

The latent vector carries term weights and geometric targets; the rules
here resolve environment-dependent coordinates from the grounded
objects (current object positions, support surfaces, repulsion
sources), fill defaults for always-active terms, and drop terms with
negligible weight. Collision and smoothness are always present.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import LengthMismatch, UnresolvedReference
from .geometry import quat_normalize
from .kinematics import ArmModel, fk
from .world import Environment, RobotState, select_objects

H_DIM = 23
C_FLOOR = 1e-3
WEIGHT_EPS = 1e-9

DEFAULT_COLLISION_W = 1.0
DEFAULT_SMOOTHNESS_W = 1.0
DEFAULT_POSITION_W = 10.0
DEFAULT_ORIENTATION_W = 1.0
DEFAULT_SPEED_W = 1.0
DEFAULT_REPULSION_W = 3.0
DEFAULT_REPULSION_C = 10.0
DEFAULT_DIR_SPEED = 0.15
PLACE_CLEARANCE = 0.05  # target height above a surface when the held object is unknown

UPRIGHT_KINDS = ("cup", "can", "box")

TERM_KINDS = ("collision", "smoothness", "position", "orientation", "upvector", "speed", "repulsion")

PRONOUN_WORDS = ("it", "them", "that")


@dataclass(frozen=True)
class CostParams:
    """Weights plus geometric parameters for all cost terms."""

    w_collision: float = DEFAULT_COLLISION_W
    w_smoothness: float = DEFAULT_SMOOTHNESS_W
    w_position: float = 0.0
    w_orientation: float = 0.0
    w_speed: float = 0.0
    w_repulsion: float = 0.0
    p_target: tuple = (0.0, 0.0, 0.0)
    q_target: tuple = (1.0, 0.0, 0.0, 0.0)
    n_target: tuple = (0.0, 0.0, 1.0)
    v_target: tuple = (0.0, 0.0, 0.0)
    p_r: tuple = (0.0, 0.0, 0.0)
    c: float = 1.0

    def __post_init__(self):
        for name in ("w_collision", "w_smoothness", "w_position", "w_orientation", "w_speed", "w_repulsion"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.w_repulsion > WEIGHT_EPS and self.c <= 0:
            raise ValueError("repulsion constant c must be positive when repulsion is active")
        for name in ("p_target", "n_target", "v_target", "p_r"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        q = tuple(float(x) for x in self.q_target)
        if abs(sum(x * x for x in q) - 1.0) > 1e-6:
            raise ValueError("q_target must be a unit quaternion")
        object.__setattr__(self, "q_target", q)
        object.__setattr__(self, "c", float(self.c))

    @classmethod
    def default(cls) -> "CostParams":
        return cls()


def serialize_H(h: CostParams) -> np.ndarray:
    """Fixed layout: [6 weights][p_target][q_target][n_target][v_target][p_r][c]."""
    return np.array(
        [h.w_collision, h.w_smoothness, h.w_position, h.w_orientation, h.w_speed, h.w_repulsion]
        + list(h.p_target) + list(h.q_target) + list(h.n_target) + list(h.v_target) + list(h.p_r) + [h.c]
    )


def deserialize_H(vec) -> CostParams:
    v = np.asarray(vec, dtype=float)
    if v.shape != (H_DIM,):
        raise LengthMismatch(f"expected {H_DIM} values, got shape {v.shape}")
    w = np.maximum(v[:6], 0.0)
    q = v[9:13]
    qn = np.linalg.norm(q)
    if qn < 1e-9:
        q = np.array([1.0, 0.0, 0.0, 0.0])
    elif abs(qn - 1.0) > 1e-9:
        q = quat_normalize(q)
    n = v[13:16]
    if np.linalg.norm(n) < 1e-9:
        n = np.array([0.0, 0.0, 1.0])
    c = v[22]
    if c < C_FLOOR:
        if w[5] > WEIGHT_EPS or c <= 0:
            warnings.warn(f"repulsion constant {c} clamped to floor {C_FLOOR}")
        c = max(c, C_FLOOR)
    return CostParams(
        w_collision=w[0], w_smoothness=w[1], w_position=w[2], w_orientation=w[3], w_speed=w[4], w_repulsion=w[5],
        p_target=tuple(v[6:9]), q_target=tuple(q), n_target=tuple(n), v_target=tuple(v[16:19]), p_r=tuple(v[19:22]), c=c,
    )


@dataclass(frozen=True)
class CostTerm:
    kind: str
    weight: float
    params: tuple = ()  # sorted (name, value-tuple/float) pairs

    def __post_init__(self):
        if self.kind not in TERM_KINDS:
            raise ValueError(f"unknown cost term kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(self.params))

    def param(self, name):
        for k, v in self.params:
            if k == name:
                return np.asarray(v) if isinstance(v, tuple) else v
        raise KeyError(name)

    @staticmethod
    def make(kind, weight, **params):
        items = tuple(sorted((k, tuple(map(float, np.ravel(v))) if np.ndim(v) else float(v)) for k, v in params.items()))
        return CostTerm(kind=kind, weight=float(weight), params=items)


@dataclass(frozen=True)
class PlanningProblem:
    terms: tuple[CostTerm, ...]
    arm: ArmModel
    env: Environment
    start: RobotState
    horizon: float = 5.0
    n_waypoints: int = 10
    stop: bool = False
    ignored_object_ids: frozenset = frozenset()

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.n_waypoints < 2:
            raise ValueError("need at least two waypoints")
        if not self.terms:
            raise ValueError("at least one cost term must be active")
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "ignored_object_ids", frozenset(self.ignored_object_ids))

    def term(self, kind):
        for t in self.terms:
            if t.kind == kind:
                return t
        return None

    def terms_of(self, kind):
        return [t for t in self.terms if t.kind == kind]

    @property
    def obstacles(self):
        return tuple(o for o in self.env.obstacles if o.id not in self.ignored_object_ids)

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "n_waypoints": self.n_waypoints,
            "stop": self.stop,
            "ignored_object_ids": sorted(self.ignored_object_ids),
            "terms": [
                {"kind": t.kind, "weight": t.weight, "params": {k: list(v) if isinstance(v, tuple) else v for k, v in t.params}}
                for t in self.terms
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _box_top_rect(obj):
    cx, cy, _ = obj.position
    hx, hy = obj.half_extents[0], obj.half_extents[1]
    return (cx - hx, cx + hx), (cy - hy, cy + hy)


def _surface_point(xy, surface_obj, held_half_height):
    (x0, x1), (y0, y1) = _box_top_rect(surface_obj)
    inset = 0.02
    x = float(np.clip(xy[0], x0 + inset, x1 - inset))
    y = float(np.clip(xy[1], y0 + inset, y1 - inset))
    return np.array([x, y, surface_obj.top_z + held_half_height])


def _point_inside(env, p, ignored, margin=0.0):
    from .kinematics import box_signed_distance
    from .geometry import quat_rotate

    for o in env.obstacles:
        if o.id in ignored:
            continue
        q_inv = o.orientation * np.array([1.0, -1.0, -1.0, -1.0])
        local = quat_rotate(q_inv, np.asarray(p) - o.position)
        if box_signed_distance(local[None], o.half_extents)[0] < margin:
            return o
    return None


def _project_out(p, obj, margin=0.02):
    """Nearest point at `margin` outside an oriented box."""
    from .geometry import quat_rotate

    q_inv = obj.orientation * np.array([1.0, -1.0, -1.0, -1.0])
    local = quat_rotate(q_inv, np.asarray(p, dtype=float) - obj.position)
    h = obj.half_extents
    gap = h - np.abs(local)
    axis = int(np.argmin(gap))
    sign = 1.0 if local[axis] >= 0 else -1.0
    local[axis] = sign * (h[axis] + margin)
    return quat_rotate(obj.orientation, local) + obj.position


class _Clause:
    def __init__(self, graph, assignment, root_id):
        self.graph = graph
        self.assignment = assignment
        self.root_id = root_id
        self.ids = self._subtree_ids(root_id)
        self.negated = assignment[root_id].kind == "negation"
        self.command = None
        self.command_node = None
        for nid in self.ids:
            g = assignment[nid]
            if g.kind == "command":
                self.command, self.command_node = g.value, nid
                break

    def _subtree_ids(self, root_id):
        out, stack = [], [root_id]
        while stack:
            nid = stack.pop(0)
            out.append(nid)
            stack.extend(self.graph.node(nid).children)
        return out

    def groundings_of(self, kind):
        return [(nid, self.assignment[nid]) for nid in self.ids if self.assignment[nid].kind == kind]

    def direct_object_id(self):
        """Object referenced directly under the command node (not via a PP)."""
        if self.command_node is None:
            return None
        for cid in self.graph.node(self.command_node).children:
            g = self.assignment[cid]
            if g.kind == "object_ref":
                return g.value
        return None

    def location_object_id(self):
        """Object referenced under a location-grounded node."""
        for nid in self.ids:
            if self.assignment[nid].kind != "location":
                continue
            for cid in self.graph.node(nid).children:
                g = self.assignment[cid]
                if g.kind == "object_ref":
                    return g.value
        return None


def _resolve_selection(clause, env, reference, exclude=()):
    """Compose select/color/set groundings into one object id, if present."""
    colors = [g.value for _, g in clause.groundings_of("color")]
    selects = [g.value for _, g in clause.groundings_of("select")]
    sets = [g.value for _, g in clause.groundings_of("object_set")]
    if not (colors or selects or sets):
        return None
    pool_ids = set(sets[0]) if sets else {o.id for o in env.objects}
    pool_ids -= set(exclude)
    cands = [o for o in env.objects if o.id in pool_ids and (not colors or o.color == colors[0])]
    if not cands:
        return None
    mode = selects[0] if selects else "nearest"
    sub_env = Environment(tuple(cands))
    try:
        ids = select_objects(sub_env, selector=mode, reference=reference)
    except Exception:
        return None
    return ids[0] if ids else None


def map_problem(
    graph,
    assignment: dict,
    H: CostParams,
    state: RobotState,
    arm: ArmModel,
    bindings: dict | None = None,
    horizon: float = 5.0,
    n_waypoints: int = 10,
) -> PlanningProblem:
    """Apply the constraint-mapping rules to one grounded command.

    Multi-clause commands (linker root with Null grounding) are mapped
    clause by clause and merged. `bindings` carries session context:
    "it"/"held" object ids, the "there" point, and exclusions for
    re-selection after a negated pick.
    """
    bindings = dict(bindings or {})
    env = graph.env
    for nid in graph.node_ids:
        node = graph.node(nid)
        if node.text in PRONOUN_WORDS and assignment[nid].kind == "null" and "it" not in bindings:
            raise UnresolvedReference(f"pronoun {node.text!r} has no binding")
    root = graph.tree.root
    root_g = assignment[root]
    children = graph.node(root).children
    if root_g.kind == "null" and len(children) >= 2 and any(
        assignment[c].kind in ("command", "negation") for c in children
    ):
        problem = None
        for c in children:
            sub = _map_clause(_Clause(graph, assignment, c), H, env, state, arm, bindings, horizon, n_waypoints)
            problem = sub if problem is None else merge(problem, sub)
        return problem
    return _map_clause(_Clause(graph, assignment, root), H, env, state, arm, bindings, horizon, n_waypoints)


def _map_clause(clause, H, env, state, arm, bindings, horizon, n_waypoints):
    _, ee = fk(arm, state.joint_angles)
    terms: list[CostTerm] = []
    ignored: set[int] = set()

    w_collision = H.w_collision if H.w_collision > WEIGHT_EPS else DEFAULT_COLLISION_W
    w_smoothness = H.w_smoothness if H.w_smoothness > WEIGHT_EPS else DEFAULT_SMOOTHNESS_W

    p_target = np.array(H.p_target)
    w_position = H.w_position
    v_target = np.array(H.v_target)
    w_speed = H.w_speed
    repulsions: list[tuple[np.ndarray, float, float]] = []  # (source, weight, c)
    stop = clause.command == "stop"

    target_obj = clause.direct_object_id()
    if target_obj is None:
        sel = _resolve_selection(clause, env, ee.position, exclude=bindings.get("excluded", ()))
        if sel is not None:
            target_obj = sel
    held = bindings.get("held")

    if clause.negated:
        # forbidden region instead of a goal
        w_rep = H.w_repulsion if H.w_repulsion > WEIGHT_EPS else DEFAULT_REPULSION_W
        c = H.c if H.c >= C_FLOOR else DEFAULT_REPULSION_C
        loc_obj = clause.location_object_id()
        if clause.command in ("place", "move", "insert") or clause.groundings_of("location"):
            hh = env.get(held).half_extents[2] if held is not None else PLACE_CLEARANCE
            if loc_obj is not None:
                surf = env.get(loc_obj)
                src = _surface_point(surf.position[:2], surf, hh)
            elif "there" in bindings:
                src = np.asarray(bindings["there"], dtype=float)
            elif H.w_repulsion > WEIGHT_EPS and np.linalg.norm(H.p_r) > 0:
                src = np.array(H.p_r)
            else:
                src = _support_point_below(env, ee.position)
            repulsions.append((src, w_rep, c))
            # the forbidden spot usually was the goal; divert the goal
            if w_position > WEIGHT_EPS and np.linalg.norm(p_target - src) < 0.12:
                diverted = _divert_target(env, src, hh, arm.base_position, ignored | {held} if held is not None else ignored)
                if diverted is not None:
                    p_target = diverted
        elif target_obj is not None:
            # negated pick: repel from the object, reselect without it
            obj = env.get(target_obj)
            repulsions.append((obj.position.copy(), w_rep, c))
            excluded = set(bindings.get("excluded", ())) | {target_obj}
            bindings["excluded"] = tuple(sorted(excluded))
            resel = _resolve_selection(clause, env, ee.position, exclude=excluded)
            if resel is None and bindings.get("selection"):
                sel = bindings["selection"]
                resel = _resolve_selection_from_spec(sel, env, ee.position, excluded)
            if resel is not None:
                p_target = env.get(resel).position.copy()
                w_position = w_position if w_position > WEIGHT_EPS else DEFAULT_POSITION_W
                ignored.add(resel)
        else:
            repulsions.append((_support_point_below(env, ee.position), w_rep, c))
    else:
        if clause.command in ("pick_up", "move", "insert") and target_obj is not None:
            p_target = env.get(target_obj).position.copy()
            w_position = w_position if w_position > WEIGHT_EPS else DEFAULT_POSITION_W
            ignored.add(target_obj)
        if clause.command == "place" and target_obj is not None:
            ignored.add(target_obj)
        if clause.command in ("place", "move"):
            loc_obj = clause.location_object_id()
            locs = [g.value for _, g in clause.groundings_of("location")]
            if loc_obj is not None and "on" in locs:
                surf = env.get(loc_obj)
                hh = env.get(held).half_extents[2] if held is not None else PLACE_CLEARANCE
                p_target = _surface_point(p_target[:2], surf, hh)
                w_position = w_position if w_position > WEIGHT_EPS else DEFAULT_POSITION_W
                if held is not None:
                    ignored.add(held)
            elif "robot_here" in locs and "there" in bindings:
                p_target = np.asarray(bindings["there"], dtype=float)
                w_position = w_position if w_position > WEIGHT_EPS else DEFAULT_POSITION_W

    # direction / distance / speed attributes
    directions = [np.array(g.value) for _, g in clause.groundings_of("direction")]
    distances = [g.value for _, g in clause.groundings_of("distance")]
    speeds = [g.value for _, g in clause.groundings_of("speed")]
    if directions and distances and not clause.negated:
        ref_obj = clause.location_object_id()
        base = env.get(ref_obj).position if ref_obj is not None else ee.position
        p_target = np.asarray(base) + distances[0] * directions[0]
        w_position = w_position if w_position > WEIGHT_EPS else DEFAULT_POSITION_W
    elif directions:
        speed = speeds[0] if speeds else DEFAULT_DIR_SPEED
        v_target = speed * directions[0]
        w_speed = w_speed if w_speed > WEIGHT_EPS else DEFAULT_SPEED_W
    elif speeds:
        if np.linalg.norm(v_target) > 0:
            v_target = speeds[0] * v_target / np.linalg.norm(v_target)
        w_speed = w_speed if w_speed > WEIGHT_EPS else DEFAULT_SPEED_W

    if stop:
        w_position, w_speed = 0.0, 0.0
        v_target = np.zeros(3)

    # upright carrying context
    w_orientation = H.w_orientation
    n_target = np.array(H.n_target)
    carried = held if held is not None else target_obj
    if w_orientation <= WEIGHT_EPS and carried is not None:
        try:
            if env.get(carried).kind in UPRIGHT_KINDS:
                w_orientation, n_target = DEFAULT_ORIENTATION_W, np.array([0.0, 0.0, 1.0])
        except KeyError:
            pass

    if w_position > WEIGHT_EPS:
        inside = _point_inside(env, p_target, ignored | set(), margin=0.0)
        if inside is not None:
            warnings.warn(f"target inside obstacle {inside.id}; projected to surface")
            p_target = _project_out(p_target, inside)

    terms.append(CostTerm.make("collision", w_collision))
    terms.append(CostTerm.make("smoothness", w_smoothness))
    if w_position > WEIGHT_EPS:
        terms.append(CostTerm.make("position", w_position, target=p_target))
    if clause.command == "insert" and w_orientation > WEIGHT_EPS:
        terms.append(CostTerm.make("orientation", w_orientation, target=H.q_target))
    if w_orientation > WEIGHT_EPS:
        terms.append(CostTerm.make("upvector", w_orientation, target=n_target))
    if w_speed > WEIGHT_EPS:
        terms.append(CostTerm.make("speed", w_speed, target=v_target))
    for src, w, c in repulsions:
        if w > WEIGHT_EPS:
            terms.append(CostTerm.make("repulsion", w, source=src, c=c))

    return PlanningProblem(
        terms=tuple(terms),
        arm=arm,
        env=env,
        start=state,
        horizon=horizon,
        n_waypoints=n_waypoints,
        stop=stop,
        ignored_object_ids=frozenset(ignored),
    )


def _resolve_selection_from_spec(sel: dict, env, reference, excluded):
    cands = [
        o for o in env.objects
        if o.id not in excluded
        and (sel.get("color") is None or o.color == sel["color"])
        and (sel.get("kind") is None or o.kind == sel["kind"])
    ]
    if not cands:
        return None
    try:
        ids = select_objects(Environment(tuple(cands)), selector=sel.get("selector", "nearest"), reference=reference)
    except Exception:
        return None
    return ids[0] if ids else None


def _divert_target(env, src, held_half_height, base_position, ignored=frozenset()):
    """A placement spot away from a forbidden point, biased toward the
    arm base, on the support surface under the forbidden point."""
    src = np.asarray(src, dtype=float)
    tables = [o for o in env.objects if o.kind == "table"]
    surf = None
    for t in tables:
        (x0, x1), (y0, y1) = _box_top_rect(t)
        if x0 <= src[0] <= x1 and y0 <= src[1] <= y1:
            surf = t
            break
    if surf is None and tables:
        surf = tables[0]
    if surf is None:
        return None
    u = np.asarray(base_position[:2], dtype=float) - src[:2]
    n = np.linalg.norm(u)
    u = u / n if n > 1e-9 else np.array([-1.0, 0.0])
    (x0, x1), (y0, y1) = _box_top_rect(surf)
    for d in (0.26, 0.32, 0.2, 0.16):
        for direction in (u, -u):
            xy = src[:2] + d * direction
            if not (x0 + 0.02 <= xy[0] <= x1 - 0.02 and y0 + 0.02 <= xy[1] <= y1 - 0.02):
                continue
            ok = True
            for o in env.obstacles:
                if o.id in ignored or o.kind == "table":
                    continue
                if np.linalg.norm(xy - o.position[:2]) < max(o.half_extents[0], o.half_extents[1]) + 0.08:
                    ok = False
                    break
            if ok:
                return np.array([xy[0], xy[1], surf.top_z + held_half_height])
    return None


def _support_point_below(env, p):
    """Point under `p` on the highest support surface below it."""
    p = np.asarray(p, dtype=float)
    z = 0.0
    for o in env.objects:
        (x0, x1), (y0, y1) = _box_top_rect(o)
        if x0 <= p[0] <= x1 and y0 <= p[1] <= y1 and o.top_z < p[2]:
            z = max(z, o.top_z)
    return np.array([p[0], p[1], z])


def merge(current: PlanningProblem, incoming: PlanningProblem) -> PlanningProblem:
    """Union of cost terms: same-kind terms are replaced by the incoming
    ones, repulsion terms accumulate, and a stop command clears the
    position and speed terms."""
    if incoming.stop:
        kept = [t for t in current.terms if t.kind not in ("position", "speed", "collision", "smoothness")]
        terms = [t for t in incoming.terms if t.kind in ("collision", "smoothness")] + kept
        return replace(incoming, terms=_canonical_order(terms), stop=True,
                       ignored_object_ids=current.ignored_object_ids | incoming.ignored_object_ids)
    repulsions = current.terms_of("repulsion") + incoming.terms_of("repulsion")
    by_kind = {t.kind: t for t in current.terms if t.kind != "repulsion"}
    for t in incoming.terms:
        if t.kind != "repulsion":
            by_kind[t.kind] = t
    terms = list(by_kind.values()) + repulsions
    return replace(
        incoming,
        terms=_canonical_order(terms),
        stop=False,
        ignored_object_ids=current.ignored_object_ids | incoming.ignored_object_ids,
    )


def _canonical_order(terms):
    order = {k: i for i, k in enumerate(TERM_KINDS)}
    non_rep = sorted((t for t in terms if t.kind != "repulsion"), key=lambda t: order[t.kind])
    return tuple(non_rep) + tuple(t for t in terms if t.kind == "repulsion")
