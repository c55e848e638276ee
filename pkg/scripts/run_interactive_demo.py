#!/usr/bin/env python3
"""Scripted mid-execution correction on the laptop-avoid scene.

Trains a small model if needed, issues "put the cube on the table",
interrupts 1.2 s in with "don't put it there", and reports how far the
end-effector path stays from the forbidden spot before and after.
"""
import argparse
import pathlib
import warnings

import numpy as np

from verbaplan.datagen import build_corpus, default_arm, gen_environment, load_corpus
from verbaplan.dgg.model import load_model, save_model
from verbaplan.kinematics import fk
from verbaplan.planning import interpolate
from verbaplan.session import Session
from verbaplan.training import train_model


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", default="laptop_model.json", help="model path; trained here if missing")
    ap.add_argument("--seed", type=int, default=77)
    ap.add_argument("--interrupt", type=float, default=1.2, help="seconds into execution")
    args = ap.parse_args()
    warnings.filterwarnings("ignore")

    arm = default_arm()
    path = pathlib.Path(args.model)
    if path.exists():
        model = load_model(path)
    else:
        print("training a laptop-scenario model (600 samples)...")
        corpus_path = path.with_suffix(".corpus.jsonl")
        build_corpus(600, 21, corpus_path, scenario="laptop", arm=arm)
        model = train_model(load_corpus(corpus_path), arm=arm)
        save_model(model, path)

    env, state, scene = gen_environment(args.seed, "laptop", arm)
    session = Session(arm=arm, env=env, model=model, state=state, restarts=8, seed=5)
    session.bindings["held"] = scene["held"]
    session.bindings["it"] = scene["held"]

    out1 = session.submit_command("put the cube on the table")
    print("> put the cube on the table")
    print("  terms:", ", ".join(f"{t.kind}({t.weight:g})" for t in out1.problem.terms))
    traj1 = out1.trajectory

    steps = int(args.interrupt / 0.05)
    for _ in range(steps):
        session.tick(0.05)
    out2 = session.submit_command("don't put it there")
    print(f"> don't put it there   (at t={session.exec_clock:.2f}... replanned)")
    print("  terms:", ", ".join(f"{t.kind}({t.weight:g})" for t in out2.problem.terms))
    traj2 = out2.trajectory

    src = out2.problem.terms_of("repulsion")[0].param("source")
    d_old = min(np.linalg.norm(fk(arm, interpolate(traj1, t)[0])[1].position - src) for t in np.linspace(0, traj1.duration, 200))
    d_new = min(np.linalg.norm(fk(arm, interpolate(traj2, t)[0])[1].position - src) for t in np.linspace(0, traj2.duration, 200))
    print(f"forbidden spot: {np.round(src, 3)}")
    print(f"min path distance to it: before {d_old:.3f} m -> after {d_new:.3f} m (+{d_new - d_old:.3f})")

    session.run_to_completion()
    print(f"final status: {session.status}")


if __name__ == "__main__":
    main()
