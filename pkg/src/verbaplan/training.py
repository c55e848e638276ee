"""Corpus-to-model pipeline: featurize, fit factor weights, fit the
mixture head, assemble a saveable model."""
from __future__ import annotations

import numpy as np

from .datagen import TrainingSample, default_arm
from .dgg.crf import TrainingExample, train_crf
from .dgg.features import DEFAULT_SEED_WORDS, FeatureExtractor, load_embeddings
from .dgg.gmm import VAR_FLOOR, fit_gmm
from .dgg.grounding import build_graph
from .dgg.model import DGGModel
from .kinematics import ArmModel
from .parsing import parse_command


def corpus_vocabulary(samples) -> tuple[str, ...]:
    vocab = set()
    for s in samples:
        tree = s.tree or parse_command(s.sentence)
        vocab.update(tree.tokens)
    return tuple(sorted(vocab))


def corpus_to_examples(samples, arm: ArmModel) -> list[TrainingExample]:
    out = []
    for s in samples:
        tree = s.tree or parse_command(s.sentence)
        graph = build_graph(tree, s.env, s.state, arm)
        out.append(TrainingExample(graph=graph, groundings=s.groundings, phis=s.phis))
    return out


def fit_mixture_head(samples, components: int = 2, seed: int = 0):
    """Per-key mixtures; keys with fewer samples than components get as
    many components as they can support."""
    by_key: dict[str, list[np.ndarray]] = {}
    for s in samples:
        if s.positive and s.H is not None and s.h_key:
            by_key.setdefault(s.h_key, []).append(np.asarray(s.H, dtype=float))
    head = {}
    for i, (key, rows) in enumerate(sorted(by_key.items())):
        m = max(1, min(components, len(rows)))
        head[key] = fit_gmm(np.array(rows), m, seed=seed + i)
    return head


def train_model(
    samples: list[TrainingSample],
    arm: ArmModel | None = None,
    reg: float = 1e-4,
    gmm_components: int = 2,
    seed: int = 0,
    max_iter: int = 500,
    embeddings=None,
) -> DGGModel:
    arm = arm or default_arm()
    emb = embeddings if embeddings is not None else load_embeddings()
    vocab = corpus_vocabulary(samples)
    extractor = FeatureExtractor(vocab=vocab, seeds=tuple(DEFAULT_SEED_WORDS), embeddings=emb)
    examples = corpus_to_examples(samples, arm)
    templates, fits = train_crf(examples, extractor, reg=reg, max_iter=max_iter)
    head = fit_mixture_head(samples, components=gmm_components, seed=seed)
    meta = {
        "n_samples": len(samples),
        "n_positive": sum(1 for s in samples if s.positive),
        "templates": {f"{sig[0]}/{sig[1]}": fit.n_factors for sig, fit in fits.items()},
    }
    return DGGModel(vocab=vocab, seeds=tuple(DEFAULT_SEED_WORDS), templates=templates, gmm_head=head, embeddings=emb, meta=meta)
