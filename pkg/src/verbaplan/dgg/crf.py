"""Tree-factor log-linear model: training and exact MAP inference.

Each factor is locally normalized over its node's candidate domain, so
the joint is a product of conditionals and training decomposes per
factor template. Templates share weights across factors with the same
(POS tag, child count) signature. Inference runs bottom-up: child
combinations enter the features only through the child-variant
histogram, so child options are grouped by variant kind, keeping the
dynamic program exact while collapsing equivalent combinations.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.sparse

from ..errors import DimensionMismatch
from .features import FeatureExtractor
from .grounding import DGGraph, Grounding

MISSING_KEY_LOGTERM = -50.0  # root candidates without a mixture entry


@dataclass(frozen=True)
class FactorTemplate:
    signature: tuple[str, int]
    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))


def signature_of(node) -> tuple[str, int]:
    return (node.pos_tag, len(node.children))


def factor_log_potential(template: FactorTemplate, f) -> float:
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != template.theta.shape[0]:
        raise DimensionMismatch(f"feature dim {f.shape[-1]} vs theta dim {template.theta.shape[0]}")
    return float(np.dot(template.theta, f))


def factor_features(extractor: FeatureExtractor, graph: DGGraph, nid: int, phi: int, child_gammas) -> np.ndarray:
    """Feature rows for every candidate grounding of one node."""
    node = graph.node(nid)
    dom = graph.domains[nid]
    F = np.empty((len(dom), extractor.dim))
    for i, g in enumerate(dom):
        F[i] = extractor.features(g, node, phi, child_gammas, graph.env_features, graph=graph, context_tokens=graph.context_tokens)
    return F


def _log_softmax(logits):
    m = np.max(logits)
    z = m + np.log(np.sum(np.exp(logits - m)))
    return logits - z


def node_log_probs(extractor, templates: dict, graph: DGGraph, nid: int, phi: int, child_gammas) -> np.ndarray:
    """Locally normalized log p(gamma | node, phi, children) per candidate."""
    sig = signature_of(graph.node(nid))
    F = factor_features(extractor, graph, nid, phi, child_gammas)
    theta = templates.get(sig)
    logits = F @ theta if theta is not None else np.zeros(len(F))
    return _log_softmax(logits)


@dataclass
class InferenceResult:
    assignment: dict[int, Grounding]
    logscore: float
    root_key: str | None = None


def map_assignment(extractor, templates, graph: DGGraph, root_logterm=None) -> InferenceResult:
    """Exact MAP over grounding assignments with phi fixed to 1.

    `root_logterm(gamma)` adds an extra score to each root candidate
    (the mixture-head density term); omit for a pure factor model.
    """
    order = list(reversed(graph.node_ids))  # children before parents
    tables: dict[int, dict[Grounding, tuple[float, dict]]] = {}
    for nid in order:
        node = graph.node(nid)
        dom = graph.domains[nid]
        children = node.children
        best: dict[Grounding, tuple[float, dict]] = {}
        if not children:
            logps = node_log_probs(extractor, templates, graph, nid, 1, [])
            for i, g in enumerate(dom):
                best[g] = (float(logps[i]), {nid: g})
        else:
            kind_options = []
            for c in children:
                by_kind: dict[str, tuple[float, Grounding, dict]] = {}
                for g, (score, assign) in tables[c].items():
                    cur = by_kind.get(g.kind)
                    if cur is None or score > cur[0]:
                        by_kind[g.kind] = (score, g, assign)
                kind_options.append(list(by_kind.values()))
            for combo in itertools.product(*kind_options):
                child_gammas = [c[1] for c in combo]
                combo_score = sum(c[0] for c in combo)
                logps = node_log_probs(extractor, templates, graph, nid, 1, child_gammas)
                merged: dict = {}
                for c in combo:
                    merged.update(c[2])
                for i, g in enumerate(dom):
                    total = float(logps[i]) + combo_score
                    cur = best.get(g)
                    if cur is None or total > cur[0]:
                        best[g] = (total, {**merged, nid: g})
        tables[nid] = best

    root = graph.tree.root
    best_total, best_assign = -np.inf, None
    for g in graph.domains[root]:
        score, assign = tables[root][g]
        if root_logterm is not None:
            score += root_logterm(g)
        if score > best_total:
            best_total, best_assign = score, assign
    return InferenceResult(assignment=best_assign, logscore=best_total)


def assignment_logscore(extractor, templates, graph: DGGraph, assignment: dict, root_logterm=None, phis=None) -> float:
    """Joint log score of one full assignment; shared by tests' oracles."""
    total = 0.0
    for nid in graph.node_ids:
        node = graph.node(nid)
        phi = 1 if phis is None else phis[nid]
        child_gammas = [assignment[c] for c in node.children]
        logps = node_log_probs(extractor, templates, graph, nid, phi, child_gammas)
        total += float(logps[graph.domains[nid].index(assignment[nid])])
    if root_logterm is not None:
        total += root_logterm(assignment[graph.tree.root])
    return total


# --- training ---------------------------------------------------------


@dataclass
class TrainingExample:
    graph: DGGraph
    groundings: dict[int, Grounding]
    phis: dict[int, int]


@dataclass
class TemplateFit:
    theta: np.ndarray
    n_factors: int
    n_iter: int
    grad_inf_norm: float
    converged: bool
    objective_trace: list = field(default_factory=list)


def _collect_factors(extractor, examples):
    """Per-template stacked candidate features, centered per factor.

    Centering subtracts each factor's candidate mean, which leaves both
    the local softmax and its gradient unchanged while zeroing every
    block that is constant across candidates; the result is sparse.
    """
    buckets: dict[tuple, dict] = {}
    for ex in examples:
        for nid in ex.graph.node_ids:
            node = ex.graph.node(nid)
            dom = ex.graph.domains[nid]
            gold = ex.groundings[nid]
            try:
                gold_idx = dom.index(gold)
            except ValueError:
                raise ValueError(f"gold grounding {gold} not in domain of node {nid} ({node.text!r})")
            child_gammas = [ex.groundings[c] for c in node.children]
            F = factor_features(extractor, ex.graph, nid, ex.phis.get(nid, 1), child_gammas)
            Fc = F - F.mean(axis=0, keepdims=True)
            b = buckets.setdefault(signature_of(node), {"rows": [], "counts": [], "gold": []})
            b["rows"].append(Fc)
            b["counts"].append(len(dom))
            b["gold"].append(gold_idx)
    return buckets


def _fit_template(rows, counts, gold, dim, reg, max_iter, gtol, track_objective):
    F = scipy.sparse.csr_matrix(np.vstack(rows))
    counts = np.asarray(counts)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    gold_rows = starts + np.asarray(gold)
    K = len(counts)
    gold_ind = np.zeros(F.shape[0])
    gold_ind[gold_rows] = 1.0

    def objective(theta):
        logits = F @ theta
        seg_max = np.maximum.reduceat(logits, starts)
        ex = np.exp(logits - np.repeat(seg_max, counts))
        seg_sum = np.add.reduceat(ex, starts)
        lse = seg_max + np.log(seg_sum)
        ll = logits[gold_rows] - lse
        p = ex / np.repeat(seg_sum, counts)
        mean_ll = ll.mean()
        grad_ll = (gold_ind - p) @ F / K
        f = -(mean_ll - reg * float(theta @ theta))
        g = -(grad_ll - 2.0 * reg * theta)
        return f, np.asarray(g).ravel()

    trace = []
    cb = None
    if track_objective:
        cb = lambda xk: trace.append(float(objective(xk)[0]))  # noqa: E731
    theta0 = np.zeros(dim)
    res = scipy.optimize.minimize(
        objective, theta0, jac=True, method="L-BFGS-B",
        callback=cb, options={"maxiter": max_iter, "gtol": gtol, "maxfun": 10 * max_iter},
    )
    _, g_final = objective(res.x)
    return TemplateFit(
        theta=res.x,
        n_factors=K,
        n_iter=int(res.nit),
        grad_inf_norm=float(np.max(np.abs(g_final))),
        converged=bool(res.success) or float(np.max(np.abs(g_final))) < gtol,
        objective_trace=trace,
    )


def train_crf(examples, extractor: FeatureExtractor, reg: float = 1e-4, max_iter: int = 500, gtol: float = 1e-5, signatures=(), track_objective: bool = False):
    """Fit per-template weights by penalized maximum likelihood.

    Maximizes mean log p(gamma | node, phi, children) minus
    reg * ||theta||^2, per template, with L-BFGS. Returns
    (templates, fits). Requested signatures without samples stay at
    zero weights with a warning.
    """
    if not examples:
        raise ValueError("empty training corpus")
    buckets = _collect_factors(extractor, examples)
    templates: dict[tuple, np.ndarray] = {}
    fits: dict[tuple, TemplateFit] = {}
    for sig, b in sorted(buckets.items()):
        fit = _fit_template(b["rows"], b["counts"], b["gold"], extractor.dim, reg, max_iter, gtol, track_objective)
        templates[sig] = fit.theta
        fits[sig] = fit
    for sig in signatures:
        if sig not in templates:
            warnings.warn(f"degenerate template {sig}: no training samples, weights stay zero")
            templates[sig] = np.zeros(extractor.dim)
    return templates, fits


def training_objective(examples, extractor, theta_by_sig: dict, reg: float = 1e-4):
    """Mean-log-likelihood objective and gradient at given weights.

    Evaluates the same quantity `train_crf` optimizes; used by gradient
    checks. Returns (value, {sig: grad}).
    """
    buckets = _collect_factors(extractor, examples)
    total_val = 0.0
    grads = {}
    for sig, b in sorted(buckets.items()):
        theta = theta_by_sig[sig]
        F = scipy.sparse.csr_matrix(np.vstack(b["rows"]))
        counts = np.asarray(b["counts"])
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        gold_rows = starts + np.asarray(b["gold"])
        logits = F @ theta
        seg_max = np.maximum.reduceat(logits, starts)
        ex = np.exp(logits - np.repeat(seg_max, counts))
        seg_sum = np.add.reduceat(ex, starts)
        ll = logits[gold_rows] - (seg_max + np.log(seg_sum))
        p = ex / np.repeat(seg_sum, counts)
        gold_ind = np.zeros(F.shape[0])
        gold_ind[gold_rows] = 1.0
        K = len(counts)
        total_val += ll.mean() - reg * float(theta @ theta)
        grads[sig] = np.asarray((gold_ind - p) @ F).ravel() / K - 2.0 * reg * theta
    return total_val, grads


def infer(model, graph: DGGraph):
    """MAP groundings plus planner parameters for a bound graph.

    Returns (assignment, cost_params, logscore). Defined here against
    the DGGModel loaded from dgg.model; kept as the single inference
    entry point.
    """
    from . import gmm as gmm_mod
    from ..mapping import CostParams

    model.check_schema()
    extractor = model.extractor()
    root_logterm = gmm_mod.make_root_logterm(model.gmm_head)
    result = map_assignment(extractor, model.templates, graph, root_logterm=root_logterm)
    root_g = result.assignment[graph.tree.root]
    key = gmm_mod.root_key(root_g)
    if model.gmm_head and key in model.gmm_head:
        H = gmm_mod.select_H(model.gmm_head, root_g)
    else:
        H = CostParams.default()
    result.root_key = key
    return result.assignment, H, result.logscore
