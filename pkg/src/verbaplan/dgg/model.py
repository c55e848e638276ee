"""Trained grounding model: factor weights, mixture head, vocabulary.

Serialized as JSON with a payload checksum; loading refuses corrupted
files and models trained against a different attribute schema.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import IntegrityError, ModelMismatch, SchemaMismatch
from ..world import SCHEMA_VERSION
from .features import DEFAULT_SEED_WORDS, EmbeddingTable, FeatureExtractor, load_embeddings
from .gmm import GMM


@dataclass
class DGGModel:
    vocab: tuple[str, ...]
    seeds: tuple[str, ...]
    templates: dict[tuple, np.ndarray]
    gmm_head: dict[str, GMM] = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION
    embeddings: EmbeddingTable | None = None
    meta: dict = field(default_factory=dict)

    def extractor(self) -> FeatureExtractor:
        emb = self.embeddings if self.embeddings is not None else load_embeddings()
        return FeatureExtractor(vocab=tuple(self.vocab), seeds=tuple(self.seeds), embeddings=emb)

    def check_schema(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ModelMismatch(f"model schema {self.schema_version!r} vs runtime {SCHEMA_VERSION!r}")


def _payload(model: DGGModel) -> dict:
    return {
        "schema_version": model.schema_version,
        "vocab": list(model.vocab),
        "seeds": list(model.seeds),
        "templates": [
            {"pos_tag": sig[0], "arity": sig[1], "theta": [float(x) for x in theta]}
            for sig, theta in sorted(model.templates.items())
        ],
        "gmm_head": {
            key: {
                "weights": [float(x) for x in g.weights],
                "means": [[float(x) for x in row] for row in g.means],
                "variances": [[float(x) for x in row] for row in g.variances],
            }
            for key, g in sorted(model.gmm_head.items())
        },
        "meta": model.meta,
    }


def _checksum(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def save_model(model: DGGModel, path) -> None:
    payload = _payload(model)
    doc = {"payload": payload, "sha256": _checksum(payload)}
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True)


def load_model(path) -> DGGModel:
    """Round-trips exactly what save_model wrote; bad checksums and
    foreign attribute schemas are refused."""
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise IntegrityError(f"unreadable model file: {e}") from None
    payload = doc.get("payload")
    if payload is None or doc.get("sha256") != _checksum(payload):
        raise IntegrityError("model file failed its checksum")
    if payload["schema_version"] != SCHEMA_VERSION:
        raise SchemaMismatch(f"model schema {payload['schema_version']!r} vs runtime {SCHEMA_VERSION!r}")
    templates = {
        (t["pos_tag"], int(t["arity"])): np.array(t["theta"], dtype=float)
        for t in payload["templates"]
    }
    head = {
        key: GMM(
            weights=np.array(g["weights"]),
            means=np.array(g["means"]),
            variances=np.array(g["variances"]),
        )
        for key, g in payload["gmm_head"].items()
    }
    return DGGModel(
        vocab=tuple(payload["vocab"]),
        seeds=tuple(payload["seeds"]),
        templates=templates,
        gmm_head=head,
        schema_version=payload["schema_version"],
        meta=payload.get("meta", {}),
    )
