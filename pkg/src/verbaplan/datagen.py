"""Synthetic training corpora: sentences, scenes, gold groundings,
latent parameter labels, and correspondence-flipped negatives.

Sentence templates live in data files, one set per scenario; each
template names a labeling rule that assigns gold groundings against the
generated scene and a latent parameter vector following the worked
conventions (pickup weights 3/1/10/30, repulsion 3 with c=10, ...).
Positional parameters get small Gaussian jitter so the mixture head has
nonzero spread. Negatives flip correspondence bits to 0 and swap the
grounding for a wrong candidate; their parameter vector is dropped.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .dgg.grounding import (
    DIRECTIONS,
    Grounding,
    build_graph,
    candidate_domain,
    grounding_from_string,
    SPEED_FAST,
    SPEED_SLOW,
)
from .kinematics import ArmModel, fk, load_arm
from .parsing import ParseTree, parse_command
from .world import (
    Environment,
    ObjectEntity,
    RobotState,
    environment_from_dict,
    environment_to_dict,
    kind_from_noun,
)

H_JITTER = 0.02  # std-dev on positional latent entries

VERB_COMMANDS = {
    "put": "place", "place": "place", "set": "place", "drop": "place",
    "pick": "pick_up", "pick up": "pick_up", "grab": "pick_up", "take": "pick_up", "lift": "pick_up",
    "move": "move", "go": "move", "push": "move", "bring": "move",
    "stop": "stop", "halt": "stop",
    "insert": "insert",
}

PP_GROUNDINGS = {
    "of": Grounding.select("nearest"),
    "on": Grounding.location("on"),
    "onto": Grounding.location("on"),
    "above": Grounding.location("on"),
    "over": Grounding.location("on"),
    "to": Grounding.location("towards"),
    "towards": Grounding.location("towards"),
    "toward": Grounding.location("towards"),
    "into": Grounding.location("towards"),
    "near": Grounding.location("near"),
    "by": Grounding.location("near"),
    "at": Grounding.location("near"),
    "beside": Grounding.location("near"),
}

SELECTOR_WORDS = {"nearest": "nearest", "closest": "nearest", "leftmost": "leftmost", "rightmost": "rightmost"}

PLURAL_WORDS = ("objects", "ones", "things", "blocks", "cups", "cans", "books", "boxes", "them")


def default_arm(name: str = "planar3") -> ArmModel:
    return load_arm(resources.files("verbaplan.data").joinpath(f"arm_{name}.json"))


def _is_planar(arm: ArmModel) -> bool:
    return bool(np.all(np.abs(arm.joint_axes[:, 1]) > 0.99))


@dataclass
class TrainingSample:
    sentence: str
    env: Environment
    state: RobotState
    groundings: dict[int, Grounding]
    phis: dict[int, int]
    H: np.ndarray | None
    h_key: str | None
    scenario: str = ""
    rule: str = ""
    tree: ParseTree | None = None

    @property
    def positive(self) -> bool:
        return all(v == 1 for v in self.phis.values())


def sample_to_dict(s: TrainingSample) -> dict:
    order = s.tree.bfs_ids() if s.tree is not None else sorted(s.groundings)
    return {
        "sentence": s.sentence,
        "environment": environment_to_dict(s.env),
        "robot_state": {
            "q": list(map(float, s.state.joint_angles)),
            "dq": list(map(float, s.state.joint_velocities)),
        },
        "groundings": [s.groundings[i].to_string() for i in order],
        "phis": [int(s.phis[i]) for i in order],
        "H": None if s.H is None else [float(x) for x in s.H],
        "h_key": s.h_key,
        "scenario": s.scenario,
        "rule": s.rule,
    }


def sample_from_dict(d: dict) -> TrainingSample:
    tree = parse_command(d["sentence"])
    order = tree.bfs_ids()
    if len(order) != len(d["groundings"]):
        raise ValueError(f"grounding count mismatch for {d['sentence']!r}")
    return TrainingSample(
        sentence=d["sentence"],
        env=environment_from_dict(d["environment"]),
        state=RobotState(d["robot_state"]["q"], d["robot_state"]["dq"]),
        groundings={i: grounding_from_string(g) for i, g in zip(order, d["groundings"])},
        phis={i: int(p) for i, p in zip(order, d["phis"])},
        H=None if d.get("H") is None else np.array(d["H"], dtype=float),
        h_key=d.get("h_key"),
        scenario=d.get("scenario", ""),
        rule=d.get("rule", ""),
        tree=tree,
    )


# --- scenario environments ---------------------------------------------

TABLE_ID = 10
LAPTOP_ID = 6
HELD_ID = 7
BOOK_ID = 8
WALL_ID = 9

PICKUP_KINDS = ("block", "can", "cup")
KIND_HALF = {
    "block": (0.035, 0.035, 0.05),
    "can": (0.03, 0.03, 0.055),
    "cup": (0.035, 0.035, 0.045),
    "laptop": (0.15, 0.11, 0.012),
    "book": (0.11, 0.08, 0.015),
}


def _table(x=0.72, half=(0.42, 0.5, 0.325)):
    return ObjectEntity(id=TABLE_ID, kind="table", position=[x, 0.0, half[2]], orientation=[1, 0, 0, 0], half_extents=half)


def _scatter_xy(rng, n, x_range, y_range, min_sep=0.12, tries=60):
    if y_range[0] == y_range[1]:
        # 1-D line: sorted uniform draws plus guaranteed gaps
        width = x_range[1] - x_range[0] - (n - 1) * min_sep
        if width <= 0:
            raise ValueError("x range too narrow for requested spacing")
        xs = np.sort(rng.uniform(0.0, width, n)) + x_range[0] + min_sep * np.arange(n)
        pts = [np.array([x, y_range[0]]) for x in xs]
        rng.shuffle(pts)
        return pts
    for _ in range(tries):
        pts = []
        for _ in range(200):
            p = np.array([rng.uniform(*x_range), rng.uniform(*y_range)])
            if all(np.linalg.norm(p - q) >= min_sep for q in pts):
                pts.append(p)
                if len(pts) == n:
                    return pts
    raise RuntimeError("could not scatter objects")


def _start_state(arm: ArmModel, rng) -> RobotState:
    # tool already pitched down ("carry upright" pose), above the scene
    if _is_planar(arm):
        q = np.array([1.39, -1.14, -1.82]) + rng.uniform(-0.08, 0.08, arm.dof)
    else:
        q = np.array([0.0, -1.2, 0.0, 0.77, 0.0, 2.0, 0.0]) + rng.uniform(-0.05, 0.05, arm.dof)
    return RobotState(arm.clip(q), np.zeros(arm.dof))


def gen_pickup(seed: int, arm: ArmModel):
    """Table with five colored objects; at least one red and one blue."""
    rng = np.random.default_rng(seed)
    planar = _is_planar(arm)
    y_range = (0.0, 0.0) if planar else (-0.3, 0.3)
    table = _table()
    # keep everything inside the band where an upright grasp is reachable
    pts = _scatter_xy(rng, 5, (0.44, 0.81), y_range, min_sep=0.09)
    colors = ["red", "blue"] + [rng.choice(["red", "blue"]) for _ in range(3)]
    rng.shuffle(colors)
    objs = [table]
    for i, (pt, color) in enumerate(zip(pts, colors), start=1):
        kind = rng.choice(PICKUP_KINDS)
        half = KIND_HALF[kind]
        objs.append(
            ObjectEntity(id=i, kind=kind, position=[pt[0], pt[1], table.top_z + half[2]], orientation=[1, 0, 0, 0], half_extents=half, color=color)
        )
    env = Environment(tuple(objs), frozenset(o.id for o in objs))
    return env, _start_state(arm, rng), {"table": TABLE_ID}


def gen_laptop(seed: int, arm: ArmModel):
    """Table with a randomly placed laptop and a held cube; planar
    scenes drop the book to leave room on the reachable line."""
    rng = np.random.default_rng(seed)
    planar = _is_planar(arm)
    y_range = (0.0, 0.0) if planar else (-0.28, 0.28)
    table = _table()
    laptop_half = (0.09, 0.11, 0.012) if planar else KIND_HALF["laptop"]
    objs = [table]
    scene = {"table": TABLE_ID, "held": HELD_ID}
    if planar:
        # laptop right, cube left, placement spots open in between
        pts = [np.array([rng.uniform(0.68, 0.86), 0.0]), np.array([rng.uniform(0.46, 0.58), 0.0])]
    else:
        pts = _scatter_xy(rng, 3, (0.48, 0.9), y_range, min_sep=0.24)
        book = ObjectEntity(id=BOOK_ID, kind="book", position=[pts[2][0], pts[2][1], table.top_z + KIND_HALF["book"][2]], orientation=[1, 0, 0, 0], half_extents=KIND_HALF["book"])
        objs.append(book)
        scene["book"] = BOOK_ID
    yaw = 0.0 if planar else rng.uniform(-0.6, 0.6)
    qz = [np.cos(yaw / 2), 0.0, 0.0, np.sin(yaw / 2)]
    laptop = ObjectEntity(id=LAPTOP_ID, kind="laptop", position=[pts[0][0], pts[0][1], table.top_z + laptop_half[2]], orientation=qz, half_extents=laptop_half)
    held = ObjectEntity(id=HELD_ID, kind="block", position=[pts[1][0], pts[1][1], table.top_z + KIND_HALF["block"][2]], orientation=[1, 0, 0, 0], half_extents=KIND_HALF["block"], color="green")
    objs += [laptop, held]
    scene["laptop"] = LAPTOP_ID
    env = Environment(tuple(objs), frozenset(o.id for o in objs if o.id != HELD_ID))
    return env, _start_state(arm, rng), scene


def gen_corridor(seed: int, arm: ArmModel):
    """A wall between the arm and a reachable target object."""
    rng = np.random.default_rng(seed)
    planar = _is_planar(arm)
    y_range = (0.0, 0.0) if planar else (-0.2, 0.2)
    table = _table()
    wall_h = rng.uniform(0.14, 0.2)  # wall height above the table top
    wall = ObjectEntity(
        id=WALL_ID, kind="box",
        position=[rng.uniform(0.5, 0.6), 0.0, table.top_z + wall_h / 2],
        orientation=[1, 0, 0, 0],
        half_extents=[0.03, 0.5 if planar else 0.3, wall_h / 2],
    )
    kind = "can"
    half = KIND_HALF[kind]
    target = ObjectEntity(
        id=2, kind=kind,
        position=[rng.uniform(0.74, 0.87), rng.uniform(*y_range), table.top_z + half[2]],
        orientation=[1, 0, 0, 0], half_extents=half, color="red",
    )
    env = Environment((table, wall, target), frozenset({TABLE_ID, WALL_ID, 2}))
    if _is_planar(arm):
        q = np.array([1.63, -1.24, -1.95]) + rng.uniform(-0.06, 0.06, arm.dof)
    else:
        q = np.array([0.0, -1.2, 0.0, 0.97, 0.0, 2.0, 0.0]) + rng.uniform(-0.05, 0.05, arm.dof)
    return env, RobotState(arm.clip(q), np.zeros(arm.dof)), {"table": TABLE_ID, "wall": WALL_ID, "target": 2}


SCENARIOS = {"pickup": gen_pickup, "laptop": gen_laptop, "corridor": gen_corridor}


def gen_environment(seed: int, scenario: str, arm: ArmModel | None = None):
    """Deterministic scene + start state for a named scenario preset."""
    arm = arm or default_arm()
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; have {sorted(SCENARIOS)}")
    return SCENARIOS[scenario](seed, arm)


def load_templates(scenario: str) -> list[dict]:
    text = resources.files("verbaplan.data").joinpath(f"templates_{scenario}.json").read_text()
    return json.loads(text)["templates"]


# --- gold labeling ------------------------------------------------------


def _nearest_of_color(env, color, ref, exclude=()):
    cands = [o for o in env.objects if o.color == color and o.id not in exclude]
    if not cands:
        return None
    return min(cands, key=lambda o: (float(np.linalg.norm(o.position - ref)), o.id))


def _label_object_node(node, ctx):
    toks = node.tokens
    if any(t in PLURAL_WORDS for t in toks):
        return Grounding.object_set(ctx["all_ids"])
    if node.text in ("it", "that one", "this one", "that"):
        return Grounding.object_ref(ctx.get("held") or ctx["target"])
    if "you" in toks or "me" in toks:
        return Grounding.object_ref(ctx["nearest_any"])
    kinds = [kind_from_noun(t) for t in toks]
    for k in kinds:
        if k == "table":
            return Grounding.object_ref(ctx["table"])
        if k == "laptop" and "laptop" in ctx:
            return Grounding.object_ref(ctx["laptop"])
        if k == "book" and "book" in ctx:
            return Grounding.object_ref(ctx["book"])
    return Grounding.object_ref(ctx["target"])


def label_tree(tree: ParseTree, env: Environment, ctx: dict) -> dict[int, Grounding]:
    """Gold groundings for a template-generated sentence."""
    out = {}
    for nid in tree.bfs_ids():
        node = tree.node(nid)
        tag = node.pos_tag
        toks = node.tokens
        if tag == "VB":
            verb = node.text if node.text in VERB_COMMANDS else toks[0]
            out[nid] = Grounding.command(VERB_COMMANDS.get(verb, "move"))
        elif tag == "VB-NEG":
            out[nid] = Grounding.negation()
        elif tag == "JJ":
            if node.text in SELECTOR_WORDS:
                out[nid] = Grounding.select(SELECTOR_WORDS[node.text])
            else:
                out[nid] = Grounding.color(node.text)
        elif tag == "PP":
            if node.text in PP_GROUNDINGS:
                out[nid] = PP_GROUNDINGS[node.text]
            else:
                out[nid] = Grounding.null()  # clause linker
        elif tag == "RB":
            if node.text in ("there", "here"):
                out[nid] = Grounding.location("robot_here")
            elif any(t in DIRECTIONS for t in toks):
                word = next(t for t in toks if t in DIRECTIONS)
                out[nid] = Grounding("direction", DIRECTIONS[word])
            elif node.text in ("slowly", "slow"):
                out[nid] = Grounding.speed(SPEED_SLOW)
            elif node.text in ("quickly", "fast"):
                out[nid] = Grounding.speed(SPEED_FAST)
            else:
                dom = candidate_domain(node, env)
                dist = next((g for g in dom if g.kind == "distance"), None)
                out[nid] = dist if dist is not None else Grounding.null()
        elif tag in ("NN", "NP", "PRP", "DT-span"):
            out[nid] = _label_object_node(node, ctx)
        else:
            out[nid] = Grounding.null()
    return out


# --- latent parameter labels -------------------------------------------


def _h_vector(rng, weights, p_target=None, n_target=(0, 0, 1), v_target=(0, 0, 0), p_r=None, c=1.0, jitter=H_JITTER):
    from .mapping import CostParams, serialize_H

    def jit(v):
        return tuple(np.asarray(v, dtype=float) + rng.normal(0.0, jitter, 3))

    h = CostParams(
        w_collision=weights[0], w_smoothness=weights[1], w_position=weights[2],
        w_orientation=weights[3], w_speed=weights[4], w_repulsion=weights[5],
        p_target=jit(p_target) if p_target is not None else (0.0, 0.0, 0.0),
        n_target=tuple(np.asarray(n_target, dtype=float)),
        v_target=tuple(np.asarray(v_target, dtype=float)),
        p_r=jit(p_r) if p_r is not None else (0.0, 0.0, 0.0),
        c=c,
    )
    return serialize_H(h)


def _free_spot(env, rng, avoid_ids, table_id, planar):
    table = env.get(table_id)
    (x0, x1), (y0, y1) = (table.position[0] - table.half_extents[0] + 0.08, table.position[0] + table.half_extents[0] - 0.08), (
        table.position[1] - table.half_extents[1] + 0.08, table.position[1] + table.half_extents[1] - 0.08)
    # keep placement spots where an upright-tool reach is comfortable
    x0 = max(x0, 0.38)
    x1 = min(x1, 0.72)
    for _ in range(200):
        x = rng.uniform(x0, x1)
        y = 0.0 if planar else rng.uniform(y0, y1)
        p = np.array([x, y])
        ok = True
        for oid in avoid_ids:
            o = env.get(oid)
            if planar:
                clear = abs(p[0] - o.position[0]) >= o.half_extents[0] + 0.1
            else:
                clear = np.linalg.norm(p - o.position[:2]) >= max(o.half_extents[0], o.half_extents[1]) + 0.1
            if not clear:
                ok = False
                break
        if ok:
            return p
    return np.array([(x0 + x1) / 2, 0.0])


def gen_sample(template: dict, env: Environment, state: RobotState, arm: ArmModel, rng, scene: dict, scenario: str = "") -> TrainingSample:
    """Instantiate one template against a scene: sentence, gold
    groundings, and the latent parameter label for its rule."""
    _, ee = fk(arm, state.joint_angles)
    planar = _is_planar(arm)
    rule = template["rule"]
    pattern = template["pattern"]
    colors_present = sorted({o.color for o in env.objects if o.color != "none"})
    color = rng.choice(colors_present) if colors_present else "red"
    target = _nearest_of_color(env, color, ee.position)
    held = scene.get("held")
    ctx = dict(scene)
    ctx.update(
        all_ids=tuple(sorted(o.id for o in env.objects if o.id != scene.get("table"))),
        nearest_any=min(env.objects, key=lambda o: (float(np.linalg.norm(o.position - ee.position)), o.id)).id,
    )

    slots = {"color": color}
    if target is not None:
        slots["kind"] = target.kind
        ctx["target"] = target.id
    if held is not None:
        slots["kind"] = env.get(held).kind
        ctx.setdefault("target", held)
    if "target" in scene:
        ctx["target"] = scene["target"]
        slots.setdefault("kind", env.get(scene["target"]).kind)
    if "{obstacle}" in pattern:
        oid = rng.choice([i for i in (scene.get("laptop"), scene.get("book")) if i is not None])
        slots["obstacle"] = env.get(oid).kind
        ctx["obstacle"] = oid
    sentence = pattern.format(**slots)
    tree = parse_command(sentence)
    groundings = label_tree(tree, env, ctx)

    H, key = None, None
    tid = ctx.get("target")
    if rule == "pickup":
        H = _h_vector(rng, (3.0, 1.0, 10.0, 30.0, 0.0, 0.0), p_target=env.get(tid).position)
        key = "pick_up"
    elif rule == "pickup_neg":
        resel = _nearest_of_color(env, color, ee.position, exclude={tid}) or env.get(tid)
        H = _h_vector(rng, (3.0, 1.0, 10.0, 30.0, 0.0, 3.0), p_target=resel.position, p_r=env.get(tid).position, c=10.0)
        key = "negation"
    elif rule == "place":
        spot = _free_spot(env, rng, [i for i in (scene.get("laptop"), scene.get("book"), held) if i], scene["table"], planar)
        hh = env.get(held).half_extents[2] if held is not None else 0.05
        H = _h_vector(rng, (1.0, 3.0, 10.0, 100.0, 0.0, 0.0), p_target=[spot[0], spot[1], env.get(scene["table"]).top_z + hh])
        key = "place"
    elif rule in ("place_neg", "place_with_neg"):
        avoid = ctx.get("obstacle") or scene.get("laptop") or scene.get("book")
        hh = env.get(held).half_extents[2] if held is not None else 0.05
        top = env.get(scene["table"]).top_z + hh
        spot = _free_spot(env, rng, [i for i in (scene.get("laptop"), scene.get("book"), held) if i], scene["table"], planar)
        forb = env.get(avoid).position if avoid is not None else ee.position
        H = _h_vector(rng, (1.0, 3.0, 10.0, 100.0, 0.0, 3.0), p_target=[spot[0], spot[1], top], p_r=[forb[0], forb[1], top], c=10.0)
        key = "negation" if rule == "place_neg" else "place"
    elif rule == "move_target":
        H = _h_vector(rng, (3.0, 1.0, 10.0, 0.0, 0.0, 0.0), p_target=env.get(tid).position)
        key = "move"
    elif rule == "guide":
        word = next((t for t in sentence.split() if t in DIRECTIONS), "up")
        H = _h_vector(rng, (1.0, 1.0, 0.0, 0.0, 1.0, 0.0), v_target=0.15 * np.array(DIRECTIONS[word]))
        key = "move"
    elif rule == "slow":
        H = _h_vector(rng, (1.0, 2.0, 0.0, 0.0, 1.0, 0.0))
        key = "move"
    elif rule == "stop":
        H = _h_vector(rng, (1.0, 3.0, 0.0, 0.0, 0.0, 0.0))
        key = "stop"
    else:
        raise ValueError(f"unknown labeling rule {rule!r}")

    phis = {nid: 1 for nid in tree.bfs_ids()}
    return TrainingSample(
        sentence=sentence, env=env, state=state, groundings=groundings, phis=phis,
        H=H, h_key=key, scenario=scenario, rule=rule, tree=tree,
    )


def flip_negatives(sample: TrainingSample, k: int, seed: int = 0) -> list[TrainingSample]:
    """Derived negatives: at least one node's correspondence flipped to 0
    and its grounding replaced with a wrong candidate; H dropped."""
    if not sample.positive:
        raise ValueError("negatives derive from all-true samples")
    rng = np.random.default_rng(seed)
    tree = sample.tree or parse_command(sample.sentence)
    out = []
    ids = tree.bfs_ids()
    for _ in range(k):
        n_flip = 1 + int(rng.random() < 0.35)
        flip_ids = list(rng.choice(ids, size=min(n_flip, len(ids)), replace=False))
        groundings = dict(sample.groundings)
        phis = {nid: 1 for nid in ids}
        for nid in flip_ids:
            dom = candidate_domain(tree.node(nid), sample.env)
            wrong = [g for g in dom if g != sample.groundings[nid]]
            if not wrong:
                continue
            groundings[nid] = wrong[int(rng.integers(len(wrong)))]
            phis[nid] = 0
        out.append(
            TrainingSample(
                sentence=sample.sentence, env=sample.env, state=sample.state,
                groundings=groundings, phis=phis, H=None, h_key=None,
                scenario=sample.scenario, rule=sample.rule, tree=tree,
            )
        )
    return out


def verify_sample(sample: TrainingSample, arm: ArmModel, restarts: int = 8, seed: int = 0) -> TrainingSample:
    """Plan the sample's labeled problem; record any collision-weight
    escalation the planner needed back into the latent vector.

    Planning every sample is far too slow to run inside corpus
    generation, so this is exposed separately (datagen --verify, and the
    suite runs it over a sampled subset).
    """
    from .mapping import deserialize_H, map_problem, serialize_H
    from .planning import plan

    if sample.H is None or sample.rule == "stop":
        return sample
    graph = build_graph(sample.tree, sample.env, sample.state, arm)
    bindings = {"held": HELD_ID, "it": HELD_ID} if sample.scenario == "laptop" else {}
    problem = map_problem(graph, sample.groundings, deserialize_H(sample.H), sample.state, arm, bindings=bindings)
    if problem.stop or problem.term("position") is None:
        return sample
    result = plan(problem, restarts=restarts, seed=seed)
    if result.escalations == 0:
        return sample
    H = deserialize_H(sample.H)
    from dataclasses import replace as dc_replace

    escalated = dc_replace(H, w_collision=H.w_collision * (2.0 ** result.escalations))
    return TrainingSample(
        sentence=sample.sentence, env=sample.env, state=sample.state,
        groundings=sample.groundings, phis=sample.phis,
        H=serialize_H(escalated), h_key=sample.h_key,
        scenario=sample.scenario, rule=sample.rule, tree=sample.tree,
    )


def parse_mix(mix: str) -> tuple[int, int]:
    pos, neg = mix.split(":")
    return int(pos), int(neg)


def generate_corpus(n: int, seed: int, scenario: str = "pickup", mix: str = "1:3", arm: ArmModel | None = None) -> list[TrainingSample]:
    """n samples with the requested positive:negative ratio, deterministic
    under the seed."""
    arm = arm or default_arm()
    templates = load_templates(scenario)
    pos_w, neg_w = parse_mix(mix)
    n_pos = max(1, round(n * pos_w / (pos_w + neg_w)))
    rng = np.random.default_rng(seed)
    samples: list[TrainingSample] = []
    i = 0
    while len(samples) < n:
        env, state, scene = gen_environment(seed * 1_000_003 + i, scenario, arm)
        template = templates[int(rng.integers(len(templates)))]
        try:
            s = gen_sample(template, env, state, arm, rng, scene, scenario)
        except Exception:
            i += 1
            continue
        samples.append(s)
        if len(samples) < n:
            k = min(neg_w if n_pos > 1 else 0, n - len(samples))
            samples.extend(flip_negatives(s, k, seed=seed + 7919 * i))
        i += 1
    return samples[:n]


def build_corpus(n: int, seed: int, out_path, scenario: str = "pickup", mix: str = "1:3", arm: ArmModel | None = None, verify: bool = False) -> int:
    """Write a JSON-lines corpus; byte-identical across runs per seed.

    With `verify`, every positive sample is planned and escalated
    collision weights are folded back into its latent vector (slow)."""
    arm = arm or default_arm()
    samples = generate_corpus(n, seed, scenario=scenario, mix=mix, arm=arm)
    if verify:
        samples = [verify_sample(s, arm, seed=seed) if s.positive else s for s in samples]
    with open(out_path, "w") as f:
        for s in samples:
            f.write(json.dumps(sample_to_dict(s), sort_keys=True, separators=(",", ":")) + "\n")
    return len(samples)


def load_corpus(path) -> list[TrainingSample]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(sample_from_dict(json.loads(line)))
    return out
