"""Grounding graphs: candidate generation, features, CRF, mixture head."""

from .grounding import (  # noqa: F401
    COMMAND_KINDS,
    LOCATION_RELS,
    SELECT_MODES,
    DGGraph,
    Grounding,
    build_graph,
    grounding_from_string,
)
from .features import EmbeddingTable, FeatureExtractor, feature_vector, load_embeddings  # noqa: F401
from .crf import FactorTemplate, factor_log_potential, infer, train_crf, signature_of  # noqa: F401
from .gmm import GMM, select_H, train_gmm, root_key  # noqa: F401
from .model import DGGModel, load_model, save_model  # noqa: F401
