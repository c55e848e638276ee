"""Log-linear factor features for grounding variables.

One feature vector per (grounding candidate, phrase node,
correspondence bit, child groundings, environment) tuple: word
occurrence bits over the vocabulary, POS one-hot, per-seed-word best
cosine similarity of the phrase tokens, a grounding description block,
a child-variant histogram, the correspondence bit with its match
interactions, and the raw environment block. Blocks that do not vary
with the candidate cancel inside each factor's softmax but are kept so
a single schema serves training, inference, and inspection.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from ..parsing import POS_TAGS, PhraseNode
from ..world import ATTRIBUTE_SLOTS, COLORS, ENV_FEATURE_LEN, OBJECT_KINDS, kind_from_noun
from .grounding import COMMAND_KINDS, DGGraph, Grounding, LOCATION_RELS, SELECT_MODES, VARIANTS

DEFAULT_SEED_WORDS = (
    "pick", "put", "place", "move", "stop", "insert", "grab",
    "blue", "red", "green", "table", "cup", "block", "can", "book", "laptop",
    "on", "near", "left", "right", "up", "down", "there", "don't", "slowly", "fast",
)

PLURAL_HINTS = ("objects", "ones", "blocks", "cups", "cans", "books", "boxes", "things", "them")


class EmbeddingTable:
    """Word vectors from a text file, one `word v1 .. vd` per line."""

    def __init__(self, vectors: dict[str, np.ndarray]):
        if not vectors:
            raise ValueError("empty embedding table")
        dims = {v.shape[0] for v in vectors.values()}
        if len(dims) != 1:
            raise ValueError(f"inconsistent embedding dimensions {dims}")
        self.dim = dims.pop()
        self.vectors = {}
        for w, v in vectors.items():
            n = np.linalg.norm(v)
            if n < 1e-12:
                raise ValueError(f"zero-norm embedding for {w!r}")
            self.vectors[w] = v / n

    def __contains__(self, word):
        return word in self.vectors

    def cosine(self, a: str, b: str) -> float:
        va, vb = self.vectors.get(a), self.vectors.get(b)
        if va is None or vb is None:
            return 0.0
        return float(np.dot(va, vb))

    @classmethod
    def from_text(cls, text: str) -> "EmbeddingTable":
        vectors = {}
        for line in text.splitlines():
            parts = line.split()
            if len(parts) < 2:
                continue
            vectors[parts[0]] = np.array([float(x) for x in parts[1:]])
        return cls(vectors)


def load_embeddings(path=None) -> EmbeddingTable:
    if path is None:
        text = resources.files("verbaplan.data").joinpath("embeddings.txt").read_text()
    else:
        with open(path) as f:
            text = f.read()
    return EmbeddingTable.from_text(text)


_N_MATCH = 8  # correspondence match indicators


@dataclass
class FeatureExtractor:
    vocab: tuple[str, ...]
    seeds: tuple[str, ...]
    embeddings: EmbeddingTable

    def __post_init__(self):
        self._vocab_index = {w: i for i, w in enumerate(self.vocab)}
        base = 0
        self.slices = {}
        for name, width in [
            ("occurrence", len(self.vocab)),
            ("pos", len(POS_TAGS)),
            ("seed_sim", len(self.seeds)),
            ("variant", len(VARIANTS)),
            ("command", len(COMMAND_KINDS)),
            ("select", len(SELECT_MODES)),
            ("color", len(COLORS)),
            ("location", len(LOCATION_RELS)),
            ("object_attrs", len(ATTRIBUTE_SLOTS)),
            ("object_geom", 5),
            ("numeric", 5),
            ("child_hist", len(VARIANTS)),
            ("phi", 1 + _N_MATCH),
            ("env", ENV_FEATURE_LEN),
        ]:
            self.slices[name] = slice(base, base + width)
            base += width
        self.dim = base

    # --- helpers -----------------------------------------------------
    def _seed_sims(self, tokens) -> np.ndarray:
        out = np.zeros(len(self.seeds))
        for i, s in enumerate(self.seeds):
            out[i] = max((self.embeddings.cosine(t, s) for t in tokens), default=0.0)
        return out

    def _object_words(self, env, ids):
        colors, kinds = set(), set()
        for oid in ids:
            try:
                o = env.get(oid)
            except KeyError:
                continue
            if o.color != "none":
                colors.add(o.color)
            kinds.add(o.kind)
        return colors, kinds

    def _match_indicators(self, gamma: Grounding, node: PhraseNode, graph: DGGraph, context_tokens):
        toks = node.tokens
        m = np.zeros(_N_MATCH)
        canon = gamma.canonical_words
        if canon:
            m[0] = float(any(t in canon for t in toks))
            m[1] = max((self.embeddings.cosine(t, c) for t in toks for c in canon), default=0.0)
        if gamma.kind == "distance":
            m[0] = float(any(t.replace(".", "").isdigit() for t in toks))
        if gamma.kind in ("object_ref", "object_set") and graph is not None:
            ids = [gamma.value] if gamma.kind == "object_ref" else list(gamma.value)
            colors, kinds = self._object_words(graph.env, ids)
            kind_words = set(kinds)
            for t in toks:
                k = kind_from_noun(t)
                if k in kind_words:
                    m[3] = 1.0
            m[2] = float(any(c in toks for c in colors))
            ctx = context_tokens or ()
            m[4] = float(any(c in ctx for c in colors))
            m[5] = float(any(kind_from_noun(t) in kind_words for t in ctx))
            plural = any(t in PLURAL_HINTS or (t.endswith("s") and kind_from_noun(t)) for t in toks)
            agrees = (gamma.kind == "object_set") == bool(plural)
            m[6] = float(agrees)
        if gamma.kind == "negation":
            m[7] = float(any(t in ("don't", "not", "never", "no") for t in toks))
        return m

    # --- main entry ---------------------------------------------------
    def features(
        self,
        gamma: Grounding,
        node: PhraseNode,
        phi: int,
        child_gammas: list[Grounding],
        env_features: np.ndarray,
        graph: DGGraph | None = None,
        context_tokens=(),
    ) -> np.ndarray:
        f = np.zeros(self.dim)
        toks = node.tokens
        occ = f[self.slices["occurrence"]]
        for t in toks:
            i = self._vocab_index.get(t)
            if i is not None:
                occ[i] = 1.0
        f[self.slices["pos"]][POS_TAGS.index(node.pos_tag)] = 1.0
        f[self.slices["seed_sim"]] = self._seed_sims(toks)

        f[self.slices["variant"]][VARIANTS.index(gamma.kind)] = 1.0
        if gamma.kind == "command":
            f[self.slices["command"]][COMMAND_KINDS.index(gamma.value)] = 1.0
        elif gamma.kind == "select":
            f[self.slices["select"]][SELECT_MODES.index(gamma.value)] = 1.0
        elif gamma.kind == "color":
            f[self.slices["color"]][COLORS.index(gamma.value)] = 1.0
        elif gamma.kind == "location":
            f[self.slices["location"]][LOCATION_RELS.index(gamma.value)] = 1.0
        elif gamma.kind in ("object_ref", "object_set") and graph is not None:
            from ..world import attribute_vector

            ids = [gamma.value] if gamma.kind == "object_ref" else list(gamma.value)
            attrs = np.zeros(len(ATTRIBUTE_SLOTS))
            geoms = []
            for oid in ids:
                try:
                    o = graph.env.get(oid)
                except KeyError:
                    continue
                attrs += attribute_vector(o)
                g = graph.object_geometry.get(oid)
                if g is not None:
                    geoms.append(g)
            if ids:
                attrs /= len(ids)
            f[self.slices["object_attrs"]] = attrs
            geom = np.zeros(5)
            if geoms:
                gm = np.mean(geoms, axis=0)
                if gamma.kind == "object_ref":
                    geom = gm
                else:
                    geom[0] = gm[0]
                    geom[1] = len(ids) / max(len(graph.env.objects), 1)
            f[self.slices["object_geom"]] = geom
        num = f[self.slices["numeric"]]
        if gamma.kind == "distance":
            num[0] = gamma.value
        elif gamma.kind == "speed":
            num[1] = gamma.value
        elif gamma.kind == "direction":
            num[2:5] = gamma.value

        hist = f[self.slices["child_hist"]]
        for cg in child_gammas:
            hist[VARIANTS.index(cg.kind)] += 1.0

        phi_block = f[self.slices["phi"]]
        phi_block[0] = float(phi)
        if phi:
            phi_block[1:] = self._match_indicators(gamma, node, graph, context_tokens)

        f[self.slices["env"]] = env_features
        return f


def feature_vector(gamma, node, phi, child_gammas, env_features, vocab, embeddings, seeds=DEFAULT_SEED_WORDS, graph=None, context_tokens=()):
    """Functional wrapper around FeatureExtractor for one-off use."""
    ex = FeatureExtractor(vocab=tuple(vocab), seeds=tuple(seeds), embeddings=embeddings)
    return ex.features(gamma, node, phi, child_gammas, env_features, graph=graph, context_tokens=context_tokens)
