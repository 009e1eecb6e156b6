"""Greedy univariate decision trees used to propose numeric cut-off values.

The trees are never used for prediction. Each internal node contributes a
``(feature, tau, q_tau)`` candidate, where ``q_tau`` is the node's impurity
decrease weighted by the fraction of the dataset reaching it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

# Splits whose impurity decrease is below this are treated as no split.
MIN_GAIN = 1e-12


@dataclass(frozen=True)
class Leaf:
    count: int


@dataclass(frozen=True)
class Internal:
    """Split node; a sample goes right iff ``x[feature] > tau``."""

    feature: int
    tau: float
    q_tau: float
    count: int
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Internal]


@dataclass(frozen=True)
class CutoffCandidate:
    feature: int
    tau: float
    q_tau: float


def impurity_decrease(
    n: int, n_left: int, h_left: float, n_right: int, h_right: float, h: float, dataset_size: int
) -> float:
    """Weighted impurity decrease of a binary split.

    ``(n / dataset_size) * (h - n_left / n * h_left - n_right / n * h_right)``
    """
    if n_left < 1 or n_right < 1:
        raise ValueError("both children of a split must be non-empty")
    if n_left + n_right != n:
        raise ValueError(f"child counts {n_left}+{n_right} do not sum to {n}")
    return (n / dataset_size) * (h - (n_left / n) * h_left - (n_right / n) * h_right)


def entropy(labels: np.ndarray) -> float:
    """Base-2 entropy of a label vector."""
    if len(labels) == 0:
        return 0.0
    _, counts = np.unique(labels, return_counts=True)
    return _entropy_counts(counts.astype(np.float64))


def _entropy_counts(counts: np.ndarray) -> float:
    total = counts.sum()
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def _entropy_rows(counts: np.ndarray) -> np.ndarray:
    """Row-wise entropy of a 2-D count matrix."""
    totals = counts.sum(axis=1, keepdims=True)
    p = counts / totals
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=1)


def variance(values: np.ndarray) -> float:
    return float(np.var(values)) if len(values) else 0.0


class _Builder:
    def __init__(self, X: np.ndarray, y: np.ndarray, min_leaf: int, dataset_size: int, task: str):
        self.X = X
        self.y = y
        self.min_leaf = min_leaf
        self.dataset_size = dataset_size
        self.task = task
        if task == "classification":
            _, codes = np.unique(y, return_inverse=True)
            self.codes = codes.reshape(-1)
            self.onehot = np.eye(int(self.codes.max()) + 1)[self.codes]

    def impurity(self, idx: np.ndarray) -> float:
        if self.task == "classification":
            return _entropy_counts(np.bincount(self.codes[idx]).astype(np.float64))
        return variance(self.y[idx])

    def pure(self, idx: np.ndarray) -> bool:
        if self.task == "classification":
            codes = self.codes[idx]
            return bool(np.all(codes == codes[0]))
        values = self.y[idx]
        return bool(np.all(values == values[0]))

    def best_split(self, idx: np.ndarray, h: float) -> tuple[int, float, float] | None:
        n = len(idx)
        m = self.min_leaf
        best = None
        best_gain = MIN_GAIN
        nl = np.arange(1, n, dtype=np.float64)
        nr = n - nl
        size_ok = (nl >= m) & (nr >= m)
        for j in range(self.X.shape[1]):
            x = self.X[idx, j]
            order = np.argsort(x, kind="stable")
            xs = x[order]
            valid = size_ok & (xs[:-1] < xs[1:])
            if not valid.any():
                continue
            if self.task == "classification":
                cum = np.cumsum(self.onehot[idx][order], axis=0)[:-1]
                total = cum[-1] + self.onehot[idx][order][-1]
                h_left = _entropy_rows(cum)
                h_right = _entropy_rows(total - cum)
            else:
                ys = self.y[idx][order]
                s1 = np.cumsum(ys)[:-1]
                s2 = np.cumsum(ys * ys)[:-1]
                t1, t2 = s1[-1] + ys[-1], s2[-1] + ys[-1] ** 2
                h_left = np.maximum(s2 / nl - (s1 / nl) ** 2, 0.0)
                h_right = np.maximum((t2 - s2) / nr - ((t1 - s1) / nr) ** 2, 0.0)
            gain = h - (nl / n) * h_left - (nr / n) * h_right
            gain = np.where(valid, gain, -np.inf)
            i = int(np.argmax(gain))
            # strict comparison keeps the lowest feature index on ties
            if gain[i] > best_gain:
                best_gain = float(gain[i])
                best = (j, float((xs[i] + xs[i + 1]) / 2.0), best_gain)
        return best

    def build(self, idx: np.ndarray) -> TreeNode:
        n = len(idx)
        if n < 2 * self.min_leaf or self.pure(idx):
            return Leaf(n)
        h = self.impurity(idx)
        split = self.best_split(idx, h)
        if split is None:
            return Leaf(n)
        j, tau, _ = split
        goes_right = self.X[idx, j] > tau
        left_idx, right_idx = idx[~goes_right], idx[goes_right]
        # recompute from the partition so q_tau does not carry cumsum rounding
        q = impurity_decrease(
            n,
            len(left_idx),
            self.impurity(left_idx),
            len(right_idx),
            self.impurity(right_idx),
            h,
            self.dataset_size,
        )
        return Internal(
            feature=j,
            tau=tau,
            q_tau=max(q, 0.0),
            count=n,
            left=self.build(left_idx),
            right=self.build(right_idx),
        )


def _check_inputs(X: np.ndarray, y: np.ndarray, min_leaf: int) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[1] == 0:
        raise ValueError("need at least one numeric input feature")
    if X.shape[0] == 0:
        raise ValueError("inputs are empty")
    y = np.asarray(y)
    if len(y) != X.shape[0]:
        raise ValueError(f"target has {len(y)} rows, inputs have {X.shape[0]}")
    if min_leaf < 1:
        raise ValueError(f"min_leaf must be >= 1, got {min_leaf}")
    return X, y


def fit_classification_tree(
    X: np.ndarray, y: np.ndarray, min_leaf: int, dataset_size: int | None = None
) -> TreeNode:
    """Grow an information-gain tree predicting categorical ``y`` from numeric ``X``.

    Candidate thresholds are midpoints between consecutive distinct values.
    Growth stops at pure nodes or when no split leaves ``min_leaf`` samples on
    both sides. ``dataset_size`` is the |D| used to weight ``q_tau`` and
    defaults to the number of rows.
    """
    X, y = _check_inputs(X, y, min_leaf)
    builder = _Builder(X, y, min_leaf, dataset_size or len(y), "classification")
    return builder.build(np.arange(len(y)))


def fit_regression_tree(
    X: np.ndarray, y: np.ndarray, min_leaf: int, dataset_size: int | None = None
) -> TreeNode:
    """Grow a variance-reduction tree for numeric ``y``.

    The target is standardized to zero mean and unit variance first, so
    impurity decreases are comparable across targets. A constant target gives
    a single leaf.
    """
    X, y = _check_inputs(X, y, min_leaf)
    y = y.astype(np.float64)
    sd = float(np.std(y))
    if sd == 0.0 or not np.isfinite(sd):
        return Leaf(len(y))
    y = (y - y.mean()) / sd
    builder = _Builder(X, y, min_leaf, dataset_size or len(y), "regression")
    return builder.build(np.arange(len(y)))


def extract_cutoffs(tree: TreeNode) -> list[CutoffCandidate]:
    """One candidate per internal node, in pre-order."""
    out: list[CutoffCandidate] = []
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, Internal):
            out.append(CutoffCandidate(node.feature, node.tau, node.q_tau))
            stack.append(node.right)
            stack.append(node.left)
    return out


def internal_nodes(tree: TreeNode) -> list[Internal]:
    out = []
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, Internal):
            out.append(node)
            stack.extend((node.right, node.left))
    return out
