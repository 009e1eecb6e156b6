"""Isolation Forest detector and F1-optimal threshold tuning.

Only here so the detect -> explain pipeline runs out of the box; explanation
never consults the detector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import Dataset

EULER_GAMMA = 0.5772156649015329


def average_path_length(n: int | np.ndarray) -> np.ndarray:
    """Expected path length of an unsuccessful BST search over ``n`` items."""
    n = np.asarray(n, dtype=np.float64)
    out = np.zeros_like(n)
    two = n == 2
    big = n > 2
    out[two] = 1.0
    m = n[big]
    out[big] = 2.0 * (np.log(m - 1.0) + EULER_GAMMA) - 2.0 * (m - 1.0) / m
    return out


@dataclass
class _Tree:
    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    size: list[int] = field(default_factory=list)

    def add(self, feature: int = -1, threshold: float = 0.0, size: int = 0) -> int:
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(-1)
        self.right.append(-1)
        self.size.append(size)
        return len(self.feature) - 1

    def path_lengths(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros(len(X))
        stack = [(0, np.arange(len(X)), 0)]
        while stack:
            node, rows, depth = stack.pop()
            if len(rows) == 0:
                continue
            f = self.feature[node]
            if f < 0:
                out[rows] = depth + average_path_length(np.array([self.size[node]]))[0]
                continue
            goes_left = X[rows, f] < self.threshold[node]
            stack.append((self.left[node], rows[goes_left], depth + 1))
            stack.append((self.right[node], rows[~goes_left], depth + 1))
        return out


def _grow(X: np.ndarray, height_limit: int, rng: np.random.Generator) -> _Tree:
    tree = _Tree()
    root = tree.add()
    stack = [(root, X, 0)]
    while stack:
        node, rows, depth = stack.pop()
        tree.size[node] = len(rows)
        if depth >= height_limit or len(rows) <= 1:
            continue
        lo, hi = rows.min(axis=0), rows.max(axis=0)
        splittable = np.flatnonzero(hi > lo)
        if len(splittable) == 0:
            continue
        f = int(rng.choice(splittable))
        t = float(rng.uniform(lo[f], hi[f]))
        tree.feature[node] = f
        tree.threshold[node] = t
        mask = rows[:, f] < t
        left, right = tree.add(), tree.add()
        tree.left[node], tree.right[node] = left, right
        stack.append((left, rows[mask], depth + 1))
        stack.append((right, rows[~mask], depth + 1))
    return tree


@dataclass
class IsolationForest:
    trees: list[_Tree]
    subsample_size: int
    n_trees: int
    seed: int
    feature_names: list[str]
    categories: dict[str, list[str]]

    def encode(self, data: Dataset | Sequence[Sequence]) -> np.ndarray:
        """Numeric matrix with categorical features as integer codes.

        Unseen categories map to one past the largest code.
        """
        if isinstance(data, Dataset):
            cols = [data.column(n) for n in self.feature_names]
        else:
            rows = list(data)
            cols = [[r[j] for r in rows] for j in range(len(self.feature_names))]
        out = []
        for name, col in zip(self.feature_names, cols):
            cats = self.categories.get(name)
            if cats is None:
                out.append(np.asarray(col, dtype=np.float64))
            else:
                lookup = {c: i for i, c in enumerate(cats)}
                out.append(np.array([lookup.get(v, len(cats)) for v in col], dtype=np.float64))
        return np.column_stack(out) if out else np.empty((0, 0))

    def score_matrix(self, X: np.ndarray) -> np.ndarray:
        depths = np.mean([t.path_lengths(X) for t in self.trees], axis=0)
        c = average_path_length(np.array([self.subsample_size]))[0]
        if c == 0.0:
            return np.full(len(X), 0.5)
        return 2.0 ** (-depths / c)

    def score_samples(self, data: Dataset | Sequence[Sequence]) -> np.ndarray:
        return self.score_matrix(self.encode(data))


def fit_isolation_forest(
    train: Dataset, n_trees: int = 100, subsample: int = 256, seed: int = 0
) -> IsolationForest:
    if len(train) == 0:
        raise ValueError("empty dataset")
    categories = {n: sorted(set(train.column(n))) for n in train.schema.categorical}
    model = IsolationForest([], min(subsample, len(train)), n_trees, seed, train.schema.names, categories)
    X = model.encode(train)
    rng = np.random.default_rng(seed)
    psi = model.subsample_size
    limit = int(math.ceil(math.log2(psi))) if psi > 1 else 0
    for _ in range(n_trees):
        rows = X[rng.choice(len(X), size=psi, replace=False)]
        model.trees.append(_grow(rows, limit, rng))
    return model


def score(model: IsolationForest, x: Sequence) -> float:
    """Anomaly score of one schema-ordered instance, in (0, 1); higher is more anomalous."""
    return float(model.score_samples([tuple(x)])[0])


def f1_at(scores: np.ndarray, labels: np.ndarray, threshold: float) -> float:
    pred = scores > threshold
    tp = int(np.sum(pred & (labels == 1)))
    fp = int(np.sum(pred & (labels == 0)))
    fn = int(np.sum(~pred & (labels == 1)))
    return 0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn)


def tune_threshold(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Midpoint between sorted unique scores maximizing F1 of ``score > t``.

    Ties go to the lowest threshold. With a single distinct score, a threshold
    just below it is returned (everything flagged).
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if len(s) != len(y):
        raise ValueError("scores and labels differ in length")
    if not np.any(y == 1):
        raise ValueError("threshold tuning needs at least one positive label")
    uniq = np.unique(s)
    if len(uniq) < 2:
        return float(np.nextafter(uniq[0], -np.inf))
    candidates = (uniq[:-1] + uniq[1:]) / 2.0
    # sweep from the lowest threshold: flagged set shrinks by one score group per step
    order = np.argsort(s, kind="stable")
    sorted_labels = y[order]
    positives = int(y.sum())
    group_ends = np.searchsorted(s[order], uniq, side="right")
    labels_below = np.concatenate([[0], np.cumsum(sorted_labels)])
    best_t, best_f1 = float(candidates[0]), -1.0
    for i, t in enumerate(candidates):
        below = group_ends[i]
        tp = positives - int(labels_below[below])
        flagged = len(s) - below
        fp = flagged - tp
        fn = positives - tp
        f1 = 0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn)
        if f1 > best_f1:
            best_t, best_f1 = float(t), f1
    return best_t
