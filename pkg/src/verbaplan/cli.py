"""Command-line entry points: parse, fk, datagen, train, infer, plan,
serve, demo."""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import VerbaplanError

DEMO_SCRIPT_HELP = "semicolon-separated commands, each optionally prefixed '@<seconds>' for mid-run injection"


def _cmd_parse(args):
    from .parsing import load_grammar, parse, tokenize

    grammar = load_grammar(args.grammar) if args.grammar else None
    tree = parse(tokenize(args.sentence), grammar)
    print(json.dumps(tree.to_dict(), indent=2, sort_keys=True))


def _cmd_fk(args):
    from .kinematics import fk, load_arm

    arm = load_arm(args.arm)
    q = np.array([float(x) for x in args.q.split(",")])
    links, ee = fk(arm, q)
    print(json.dumps({
        "ee_position": [float(x) for x in ee.position],
        "ee_orientation": [float(x) for x in ee.orientation],
        "up_vector": [float(x) for x in ee.up_vector],
        "links": [{"position": [float(x) for x in t], "orientation": [float(x) for x in qq]} for qq, t in links],
    }, indent=2))


def _cmd_datagen(args):
    from .datagen import build_corpus, default_arm
    from .kinematics import load_arm

    arm = load_arm(args.arm) if args.arm else default_arm()
    n = build_corpus(args.n, args.seed, args.out, scenario=args.scenario, mix=args.mix, arm=arm, verify=args.verify)
    print(f"wrote {n} samples to {args.out}")


def _cmd_train(args):
    from .datagen import default_arm, load_corpus
    from .dgg.model import save_model
    from .kinematics import load_arm
    from .training import train_model

    arm = load_arm(args.arm) if args.arm else default_arm()
    samples = load_corpus(args.corpus)
    model = train_model(samples, arm=arm, reg=args.reg, gmm_components=args.gmm_components, seed=args.seed)
    save_model(model, args.out)
    print(f"trained on {len(samples)} samples -> {args.out}")


def _cmd_infer(args):
    from .datagen import default_arm, gen_environment
    from .dgg.crf import infer
    from .dgg.grounding import build_graph
    from .dgg.model import load_model
    from .kinematics import load_arm
    from .mapping import serialize_H
    from .parsing import parse_command
    from .world import RobotState, load_environment

    arm = load_arm(args.arm) if args.arm else default_arm()
    model = load_model(args.model)
    if args.env:
        env = load_environment(args.env)
        state = RobotState(np.zeros(arm.dof), np.zeros(arm.dof))
    else:
        env, state, _ = gen_environment(args.seed, args.scenario, arm)
    tree = parse_command(args.sentence)
    graph = build_graph(tree, env, state, arm)
    assignment, H, score = infer(model, graph)
    print(json.dumps({
        "groundings": {str(nid): assignment[nid].to_string() for nid in tree.bfs_ids()},
        "H": [float(x) for x in serialize_H(H)],
        "logscore": score,
    }, indent=2))


def _cmd_plan(args):
    from .planning import plan
    from .problem_io import load_problem

    problem = load_problem(args.problem)
    result = plan(problem, restarts=args.restarts, seed=args.seed)
    out = {
        "trajectory": result.trajectory.to_dict(),
        "cost": result.breakdown.to_dict(),
        "iterations": result.iterations,
        "escalations": result.escalations,
    }
    if args.out:
        with open(args.out, "w") as f:
            json.dump(out, f, indent=2)
        print(f"wrote plan to {args.out}")
    else:
        print(json.dumps(out, indent=2))


def _cmd_serve(args):
    import uvicorn

    from .server import create_app

    app = create_app(model_path=args.model)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


def _cmd_demo(args):
    from .datagen import default_arm, gen_environment
    from .dgg.model import load_model
    from .kinematics import load_arm
    from .session import Session, evaluate

    arm = load_arm(args.arm) if args.arm else default_arm()
    model = load_model(args.model)
    env, state, _ = gen_environment(args.seed, args.scenario, arm)
    session = Session(arm=arm, env=env, model=model, state=state, seed=args.seed, restarts=args.restarts)
    steps = []
    for part in args.script.split(";"):
        part = part.strip()
        if not part:
            continue
        at = 0.0
        if part.startswith("@"):
            stamp, _, rest = part.partition(" ")
            at, part = float(stamp[1:]), rest
        steps.append((at, part))
    clock = 0.0
    for at, text in steps:
        while clock < at and session.status == "executing":
            session.tick(args.dt)
            clock += args.dt
        print(f"[{clock:6.2f}s] > {text}")
        out = session.submit_command(text)
        print(f"          groundings: " + ", ".join(
            f"{session.last_tree.node(n).text!r}->{out.assignment[n].to_string()}" for n in session.last_tree.bfs_ids()))
        print(f"          terms: " + ", ".join(f"{t.kind}({t.weight:g})" for t in out.problem.terms))
    while session.status == "executing":
        session.tick(args.dt)
        clock += args.dt
    print(f"[{clock:6.2f}s] status={session.status}")
    if session.episodes:
        rate, dur, smooth = evaluate(session.episodes)
        print(f"episodes: {len(session.episodes)}  success={rate:.0%}  duration={dur:.2f}s  smoothness={smooth:.3f}")


def main(argv=None):
    ap = argparse.ArgumentParser(prog="verbaplan", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("parse", help="parse a command into its phrase tree")
    p.add_argument("sentence")
    p.add_argument("--grammar", default=None)
    p.set_defaults(fn=_cmd_parse)

    p = sub.add_parser("fk", help="forward kinematics at a configuration")
    p.add_argument("--arm", required=True)
    p.add_argument("--q", required=True, help="comma-separated joint angles")
    p.set_defaults(fn=_cmd_fk)

    p = sub.add_parser("datagen", help="generate a training corpus")
    p.add_argument("--scenario", default="pickup", choices=["pickup", "laptop", "corridor"])
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--mix", default="1:3", help="positive:negative ratio")
    p.add_argument("--arm", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--verify", action="store_true", help="plan every positive sample; fold escalated collision weights into its parameters (slow)")
    p.set_defaults(fn=_cmd_datagen)

    p = sub.add_parser("train", help="train a model from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--arm", default=None)
    p.add_argument("--reg", type=float, default=1e-4)
    p.add_argument("--gmm-components", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("infer", help="ground a sentence against a scene")
    p.add_argument("sentence")
    p.add_argument("--model", required=True)
    p.add_argument("--env", default=None, help="environment JSON file")
    p.add_argument("--scenario", default="pickup")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--arm", default=None)
    p.set_defaults(fn=_cmd_infer)

    p = sub.add_parser("plan", help="solve a planning problem file")
    p.add_argument("--problem", required=True)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_plan)

    p = sub.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--model", default=None, help="default model path (or set VERBAPLAN_MODEL)")
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("demo", help="scripted interactive episode")
    p.add_argument("--scenario", default="laptop")
    p.add_argument("--script", required=True, help=DEMO_SCRIPT_HELP)
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int, default=3)
    p.add_argument("--arm", default=None)
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--restarts", type=int, default=4)
    p.set_defaults(fn=_cmd_demo)

    args = ap.parse_args(argv)
    try:
        args.fn(args)
    except VerbaplanError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
