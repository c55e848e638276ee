"""Diagonal Gaussian mixtures over planner parameter vectors.

One mixture per root-grounding key (the command kind, or "negation"
for negated commands). Fit by EM with k-means++ seeding; variances are
floored at 1e-4 so tight clusters stay proper densities. At use time
the mixture is collapsed to the component mean with the highest
mixture density (a mode approximation).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientData, UnknownRootGrounding
from ..mapping import CostParams, deserialize_H
from .crf import MISSING_KEY_LOGTERM
from .grounding import Grounding

VAR_FLOOR = 1e-4


@dataclass
class GMM:
    weights: np.ndarray  # (m,), sums to 1
    means: np.ndarray  # (m, h)
    variances: np.ndarray  # (m, h), diagonal, >= VAR_FLOOR
    ll_trace: list | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.variances = np.atleast_2d(np.asarray(self.variances, dtype=float))
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must sum to 1")
        if np.any(self.variances < VAR_FLOOR * (1 - 1e-12)):
            raise ValueError("variance below floor")

    @property
    def n_components(self) -> int:
        return len(self.weights)

    def component_logpdfs(self, x) -> np.ndarray:
        """Log N(x; mu_i, diag(var_i)) for each component; x (h,) or (n, h)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = x[:, None, :] - self.means[None, :, :]
        return -0.5 * np.sum(d * d / self.variances + np.log(2.0 * np.pi * self.variances), axis=2)

    def logpdf(self, x) -> np.ndarray:
        lp = self.component_logpdfs(x) + np.log(self.weights)
        m = lp.max(axis=1, keepdims=True)
        return (m + np.log(np.sum(np.exp(lp - m), axis=1, keepdims=True))).ravel()

    def mode_mean(self) -> np.ndarray:
        """Component mean with the highest mixture density."""
        dens = self.logpdf(self.means)
        return self.means[int(np.argmax(dens))].copy()


def _kmeanspp_init(X, m, rng):
    n = len(X)
    centers = [X[rng.integers(n)]]
    for _ in range(m - 1):
        d2 = np.min([np.sum((X - c) ** 2, axis=1) for c in centers], axis=0)
        total = d2.sum()
        if total <= 0:
            centers.append(X[rng.integers(n)])
            continue
        centers.append(X[rng.choice(n, p=d2 / total)])
    return np.array(centers)


def fit_gmm(X, m: int, seed: int = 0, max_iter: int = 100, tol: float = 1e-8) -> GMM:
    """EM for a diagonal-covariance mixture; log-likelihood is tracked
    per iteration and is non-decreasing whenever the variance floor is
    inactive."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, h = X.shape
    if n < m:
        raise InsufficientData(f"{n} samples for {m} components")
    rng = np.random.default_rng(seed)
    means = _kmeanspp_init(X, m, rng)
    variances = np.maximum(np.var(X, axis=0, keepdims=True), VAR_FLOOR) * np.ones((m, h))
    weights = np.full(m, 1.0 / m)
    gmm = GMM(weights, means, variances)
    trace = []
    prev = -np.inf
    for _ in range(max_iter):
        # E-step
        lp = gmm.component_logpdfs(X) + np.log(gmm.weights)
        mx = lp.max(axis=1, keepdims=True)
        log_norm = mx + np.log(np.sum(np.exp(lp - mx), axis=1, keepdims=True))
        ll = float(log_norm.sum())
        trace.append(ll)
        resp = np.exp(lp - log_norm)
        # M-step
        nk = resp.sum(axis=0)
        nk_safe = np.maximum(nk, 1e-12)
        weights = nk / n
        means = (resp.T @ X) / nk_safe[:, None]
        diff = X[:, None, :] - means[None, :, :]
        variances = np.maximum(np.einsum("nk,nkh->kh", resp, diff * diff) / nk_safe[:, None], VAR_FLOOR)
        gmm = GMM(weights, means, variances)
        if ll - prev < tol and np.isfinite(prev):
            break
        prev = ll
    gmm.ll_trace = trace
    return gmm


def root_key(root: Grounding) -> str:
    """Mixture key for a root grounding: command kind or 'negation'."""
    if root.kind == "command":
        return root.value
    if root.kind == "negation":
        return "negation"
    return f"other:{root.kind}"


def train_gmm(samples, m: int = 2, seed: int = 0, max_iter: int = 100, tol: float = 1e-8) -> dict[str, GMM]:
    """Per-key mixtures from (key, parameter-vector) pairs."""
    by_key: dict[str, list] = {}
    for key, h in samples:
        by_key.setdefault(key, []).append(np.asarray(h, dtype=float))
    head = {}
    for i, (key, rows) in enumerate(sorted(by_key.items())):
        if len(rows) < m:
            raise InsufficientData(f"key {key!r}: {len(rows)} samples for {m} components")
        head[key] = fit_gmm(np.array(rows), m, seed=seed + i, max_iter=max_iter, tol=tol)
    return head


def select_H(head: dict[str, GMM], root: Grounding) -> CostParams:
    """Planner parameters for a root grounding: the mixture's mode mean."""
    key = root_key(root)
    if key not in head:
        raise UnknownRootGrounding(f"no mixture for root key {key!r}")
    return deserialize_H(head[key].mode_mean())


def make_root_logterm(head: dict[str, GMM] | None):
    """Root-candidate score addend: mixture log-density at its mode."""
    if not head:
        return lambda g: 0.0

    def term(g: Grounding) -> float:
        key = root_key(g)
        gmm = head.get(key)
        if gmm is None:
            return MISSING_KEY_LOGTERM
        return float(gmm.logpdf(gmm.mode_mean())[0])

    return term
