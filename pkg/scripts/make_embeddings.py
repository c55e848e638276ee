#!/usr/bin/env python3
"""Regenerate the bundled word-embedding file.

Vectors are drawn around per-category anchors so that cosine similarity
reflects word relatedness (grasp verbs near each other, colors near
colors, far from furniture, ...). Deterministic under the fixed seed;
the output ships as package data so training and inference see the same
vectors without a download.
"""
import pathlib

import numpy as np

DIM = 16
SEED = 20240811
SPREAD = 0.25

CATEGORIES = {
    "verb_grasp": ["pick", "grab", "take", "lift", "snatch", "fetch", "hold"],
    "verb_place": ["put", "place", "set", "drop", "lay"],
    "verb_move": ["move", "go", "push", "bring", "shift", "slide"],
    "verb_stop": ["stop", "halt", "freeze", "wait"],
    "verb_insert": ["insert", "plug", "fit"],
    "negation": ["don't", "not", "never", "no"],
    "color": ["red", "blue", "green", "yellow", "colored"],
    "object_small": ["cup", "block", "cube", "can", "box", "bottle", "mug"],
    "furniture": ["table", "desk", "shelf", "surface"],
    "object_flat": ["book", "laptop", "notebook", "magazine"],
    "spatial_on": ["on", "onto", "above", "over", "top"],
    "spatial_near": ["near", "by", "at", "beside", "close"],
    "spatial_to": ["to", "towards", "toward", "into"],
    "spatial_of": ["of", "from"],
    "side": ["left", "right", "side"],
    "vertical": ["up", "down", "upright"],
    "deixis": ["there", "here", "that", "this", "it", "them", "one", "ones"],
    "speed_slow": ["slowly", "slow", "gently", "carefully"],
    "speed_fast": ["quickly", "fast", "rapidly"],
    "misc": ["the", "a", "an", "objects", "object", "thing", "things",
             "hole", "holes", "you", "me", "person", "human", "cm", "meters", "inches"],
}


def main():
    rng = np.random.default_rng(SEED)
    anchors = {cat: rng.normal(0.0, 1.0, DIM) for cat in CATEGORIES}
    lines = []
    for cat, words in CATEGORIES.items():
        anchor = anchors[cat]
        for w in words:
            v = anchor + SPREAD * rng.normal(0.0, 1.0, DIM)
            v = v / np.linalg.norm(v)
            lines.append(w + " " + " ".join(f"{x:.6f}" for x in v))
    out = pathlib.Path(__file__).resolve().parents[1] / "src" / "verbaplan" / "data" / "embeddings.txt"
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(lines)} vectors to {out}")


if __name__ == "__main__":
    main()
