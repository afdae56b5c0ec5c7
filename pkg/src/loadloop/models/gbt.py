"""Gradient-boosted regression trees on squared loss, built from scratch.

Split search is exact greedy over sorted unique feature values with a
variance-reduction criterion; no subsampling. Ties resolve to the lowest
feature index, then the lowest threshold, so fits are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def best_split(X: np.ndarray, y: np.ndarray) -> Optional[Tuple[int, float, float]]:
    """(feature, threshold, sse_after) of the exact greedy best split, or None
    when no split separates the data. Ties keep the lowest feature index, then
    the earliest split position."""
    n, _ = X.shape
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    ys = y[order]
    csum = np.cumsum(ys, axis=0)
    csq = np.cumsum(ys * ys, axis=0)
    total_sum = csum[-1, :]
    total_sq = csq[-1, :]
    # split after position i (left = rows [0..i]); valid only between distinct values
    nl = np.arange(1, n, dtype=float)[:, None]
    nr = n - nl
    sl, ql = csum[:-1, :], csq[:-1, :]
    sr, qr = total_sum - sl, total_sq - ql
    sse = (ql - sl * sl / nl) + (qr - sr * sr / nr)
    sse[xs[:-1, :] == xs[1:, :]] = np.inf
    per_feature_i = np.argmin(sse, axis=0)
    per_feature_sse = sse[per_feature_i, np.arange(sse.shape[1])]
    j = int(np.argmin(per_feature_sse))
    if not np.isfinite(per_feature_sse[j]):
        return None
    i = int(per_feature_i[j])
    thr = (xs[i, j] + xs[i + 1, j]) / 2.0
    return j, thr, float(per_feature_sse[j])


def _grow(X: np.ndarray, y: np.ndarray, depth: int, max_depth: int) -> TreeNode:
    node = TreeNode(value=float(np.mean(y)))
    if depth >= max_depth or len(y) < 2 or np.all(y == y[0]):
        return node
    split = best_split(X, y)
    if split is None:
        return node
    j, thr, _ = split
    mask = X[:, j] <= thr
    # the midpoint can round onto the upper value, emptying a child
    if mask.all() or not mask.any():
        return node
    node.feature = j
    node.threshold = thr
    node.left = _grow(X[mask], y[mask], depth + 1, max_depth)
    node.right = _grow(X[~mask], y[~mask], depth + 1, max_depth)
    return node


def predict_tree(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        nd, idx = stack.pop()
        if nd.is_leaf:
            out[idx] = nd.value
            continue
        mask = X[idx, nd.feature] <= nd.threshold
        stack.append((nd.left, idx[mask]))
        stack.append((nd.right, idx[~mask]))
    return out


@dataclass
class GBTEnsemble:
    base: float
    learning_rate: float
    trees: List[TreeNode]

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.full(X.shape[0], self.base)
        for tree in self.trees:
            out += self.learning_rate * predict_tree(tree, X)
        return out


def train_gbt(
    X: np.ndarray,
    y: np.ndarray,
    n_estimators: int,
    max_depth: int,
    learning_rate: float,
    X_val: Optional[np.ndarray] = None,
    y_val: Optional[np.ndarray] = None,
) -> Tuple[GBTEnsemble, List[float], List[float]]:
    """Boost on residuals of squared loss. Returns the ensemble plus per-round
    training (and, when a validation set is given, validation) MSE curves."""
    if n_estimators < 1 or max_depth < 1:
        raise ValueError("n_estimators and max_depth must be >= 1")
    if not 0 < learning_rate <= 1:
        raise ValueError("learning_rate must lie in (0, 1]")
    base = float(np.mean(y))
    pred = np.full(y.shape, base)
    val_pred = np.full(y_val.shape, base) if y_val is not None else None
    trees: List[TreeNode] = []
    train_curve: List[float] = []
    val_curve: List[float] = []
    for _ in range(n_estimators):
        residual = y - pred
        tree = _grow(X, residual, 0, max_depth)
        pred = pred + learning_rate * predict_tree(tree, X)
        trees.append(tree)
        train_curve.append(float(np.mean((y - pred) ** 2)))
        if val_pred is not None:
            val_pred = val_pred + learning_rate * predict_tree(tree, X_val)
            val_curve.append(float(np.mean((y_val - val_pred) ** 2)))
    return GBTEnsemble(base=base, learning_rate=learning_rate, trees=trees), train_curve, val_curve


def tree_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"value": node.value}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "value": node.value,
        "left": tree_to_dict(node.left),
        "right": tree_to_dict(node.right),
    }


def tree_from_dict(d: dict) -> TreeNode:
    if "left" not in d:
        return TreeNode(value=float(d["value"]))
    return TreeNode(
        feature=int(d["feature"]),
        threshold=float(d["threshold"]),
        value=float(d["value"]),
        left=tree_from_dict(d["left"]),
        right=tree_from_dict(d["right"]),
    )
