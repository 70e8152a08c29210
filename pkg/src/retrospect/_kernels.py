"""Kernel backend selection and the shared gradient-boosting driver.

The hot split-search loop lives in the compiled module `_boost_c` when it
was built; otherwise the pure-NumPy `_boost_py` twin is used. Set the
environment variable RETROSPECT_PURE_PYTHON=1 before import to force the
fallback (used by tests and the benchmark).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _boost_py

if os.environ.get("RETROSPECT_PURE_PYTHON"):
    _impl = _boost_py
    BACKEND = "python"
else:
    try:
        from . import _boost_c as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = _boost_py
        BACKEND = "python"


def backend_name() -> str:
    return BACKEND


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class BoostModel:
    """Fitted boosted-tree model: flat per-tree node arrays plus a base score."""

    base_score: float
    features: np.ndarray  # (n_trees, m) int32, -1 leaf / -2 unused
    thresholds: np.ndarray  # (n_trees, m)
    values: np.ndarray  # (n_trees, m), already scaled by the learning rate
    depth: int
    n_features: int


def fit_boost(X, y, n_trees, depth, learning_rate, min_leaf=10, lam=1e-6) -> BoostModel:
    """Gradient-boosted shallow trees on logistic loss with Newton leaf values."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    p0 = min(max(float(y.mean()), 1e-12), 1.0 - 1e-12)
    base = float(np.log(p0 / (1.0 - p0)))
    m = 2 ** (depth + 1) - 1
    features = np.full((n_trees, m), -2, dtype=np.int32)
    thresholds = np.zeros((n_trees, m))
    values = np.zeros((n_trees, m))
    if n_trees > 0:
        sort_idx = np.ascontiguousarray(
            np.argsort(X, axis=0, kind="stable"), dtype=np.int32
        )
        score = np.full(n, base)
        for t in range(n_trees):
            p = _sigmoid(score)
            g = y - p
            h = p * (1.0 - p)
            feat, thr, val, leaf_of = _impl.fit_tree(
                X, sort_idx, g, h, depth, min_leaf, lam
            )
            val = val * learning_rate
            score = score + val[leaf_of]
            features[t] = feat
            thresholds[t] = thr
            values[t] = val
    return BoostModel(base, features, thresholds, values, depth, k)


def predict_boost(model: BoostModel, X) -> np.ndarray:
    """Predicted probabilities for X under a fitted BoostModel."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    score = np.full(n, model.base_score)
    n_trees = model.features.shape[0]
    for t in range(n_trees):
        feat = model.features[t]
        node = np.zeros(n, dtype=np.intp)
        for _ in range(model.depth):
            f = feat[node]
            internal = f >= 0
            if not np.any(internal):
                break
            idx = np.flatnonzero(internal)
            go_left = X[idx, f[idx]] <= model.thresholds[t][node[idx]]
            node[idx] = np.where(go_left, 2 * node[idx] + 1, 2 * node[idx] + 2)
        score += model.values[t][node]
    return _sigmoid(score)
