"""Predicates over single features and the global predicate set.

Three predicate shapes exist: category membership, numeric intervals, and
disjunctions of those. Categorical predicates come from frequency counting
with low-support values merged by "or"; numeric predicates come from cut-off
values proposed by decision trees (or, for ablations, equal-width and k-means
bins).
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .dataset import Dataset, Value
from .dtree import extract_cutoffs, fit_classification_tree, fit_regression_tree


def _fmt(x: float) -> str:
    return format(x, ".6g")


@dataclass(frozen=True)
class CategoryIn:
    feature: str
    values: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("CategoryIn needs at least one value")
        object.__setattr__(self, "values", tuple(sorted(set(self.values))))

    @property
    def features(self) -> tuple[str, ...]:
        return (self.feature,)

    def holds(self, x: Mapping[str, Value]) -> bool:
        v = x.get(self.feature)
        return v is not None and v in self.values

    def mask(self, d: Dataset) -> np.ndarray:
        return np.isin(d.column(self.feature), np.array(self.values, dtype=object))

    def render(self) -> str:
        if len(self.values) == 1:
            return f"{self.feature}={self.values[0]}"
        return f"{self.feature} in {{{', '.join(self.values)}}}"

    def to_dict(self) -> dict:
        return {"type": "category", "feature": self.feature, "values": list(self.values)}


@dataclass(frozen=True)
class NumericInterval:
    feature: str
    lo: float = -math.inf
    hi: float = math.inf
    lo_closed: bool = True
    hi_closed: bool = False

    def __post_init__(self) -> None:
        if math.isfinite(self.lo) and math.isfinite(self.hi):
            if self.lo > self.hi or (self.lo == self.hi and not (self.lo_closed and self.hi_closed)):
                raise ValueError(f"empty interval for {self.feature}: {self.lo}, {self.hi}")

    @property
    def features(self) -> tuple[str, ...]:
        return (self.feature,)

    def _test(self, v):
        above = (v >= self.lo) if self.lo_closed else (v > self.lo)
        below = (v <= self.hi) if self.hi_closed else (v < self.hi)
        return above & below

    def holds(self, x: Mapping[str, Value]) -> bool:
        v = x.get(self.feature)
        if v is None or isinstance(v, str):
            return False
        return bool(self._test(v))

    def mask(self, d: Dataset) -> np.ndarray:
        return self._test(d.column(self.feature))

    def render(self) -> str:
        f = self.feature
        lo_op = "<=" if self.lo_closed else "<"
        hi_op = "<=" if self.hi_closed else "<"
        if math.isinf(self.lo) and math.isinf(self.hi):
            return f"{f} is any value"
        if math.isinf(self.lo):
            return f"{f}{hi_op}{_fmt(self.hi)}"
        if math.isinf(self.hi):
            return f"{f}{'>=' if self.lo_closed else '>'}{_fmt(self.lo)}"
        return f"{_fmt(self.lo)}{lo_op}{f}{hi_op}{_fmt(self.hi)}"

    def to_dict(self) -> dict:
        return {
            "type": "interval",
            "feature": self.feature,
            "lo": None if math.isinf(self.lo) else self.lo,
            "hi": None if math.isinf(self.hi) else self.hi,
            "lo_closed": self.lo_closed,
            "hi_closed": self.hi_closed,
        }


Atomic = Union[CategoryIn, NumericInterval]


@dataclass(frozen=True)
class Disjunction:
    parts: tuple[Atomic, ...]

    def __post_init__(self) -> None:
        if len(self.parts) < 2:
            raise ValueError("a disjunction needs at least two parts")

    @property
    def features(self) -> tuple[str, ...]:
        seen: list[str] = []
        for p in self.parts:
            if p.feature not in seen:
                seen.append(p.feature)
        return tuple(seen)

    def holds(self, x: Mapping[str, Value]) -> bool:
        return any(p.holds(x) for p in self.parts)

    def mask(self, d: Dataset) -> np.ndarray:
        out = np.zeros(len(d), dtype=bool)
        for p in self.parts:
            out |= p.mask(d)
        return out

    def render(self) -> str:
        return "|".join(p.render() for p in self.parts)

    def to_dict(self) -> dict:
        return {"type": "or", "parts": [p.to_dict() for p in self.parts]}


Predicate = Union[CategoryIn, NumericInterval, Disjunction]


def predicate_from_dict(data: Mapping) -> Predicate:
    kind = data["type"]
    if kind == "category":
        return CategoryIn(data["feature"], tuple(data["values"]))
    if kind == "interval":
        return NumericInterval(
            data["feature"],
            -math.inf if data["lo"] is None else float(data["lo"]),
            math.inf if data["hi"] is None else float(data["hi"]),
            bool(data["lo_closed"]),
            bool(data["hi_closed"]),
        )
    if kind == "or":
        return Disjunction(tuple(predicate_from_dict(p) for p in data["parts"]))
    raise ValueError(f"unknown predicate type {kind!r}")


def either(preds: Sequence[Predicate]) -> Predicate:
    """Flat "or" of the given predicates (a single predicate is returned as is)."""
    parts: list[Atomic] = []
    for p in preds:
        parts.extend(p.parts if isinstance(p, Disjunction) else (p,))
    return parts[0] if len(parts) == 1 else Disjunction(tuple(parts))


def _as_mapping(x, schema_names: Sequence[str] | None) -> Mapping[str, Value]:
    if isinstance(x, Mapping):
        return x
    if schema_names is None:
        raise TypeError("positional instances need the schema feature names")
    return dict(zip(schema_names, x))


def satisfies(p: Predicate, x, names: Sequence[str] | None = None) -> bool:
    """Whether instance ``x`` (a mapping, or a sequence ordered like ``names``) satisfies ``p``.

    Missing values (absent or None) satisfy no predicate.
    """
    return p.holds(_as_mapping(x, names))


def support(p: Predicate, d: Dataset) -> float:
    return int(p.mask(d).sum()) / len(d)


def _frequent(count: int, n: int, theta: float) -> bool:
    return count / n > theta


# ---------------------------------------------------------------------------
# categorical features
# ---------------------------------------------------------------------------


def generate_categorical_predicates(
    d: Dataset, theta: float, categorical_features: Sequence[str] | None = None
) -> list[Predicate]:
    """Frequent category predicates, with rare values merged by "or".

    Rare values of one feature are merged first; merged groups that are still
    rare go on a global leftover list that is swept left to right, emitting
    cross-feature disjunctions once their support exceeds ``theta``. If what
    remains after an emission could not clear ``theta`` alone, it is folded
    into that emission instead.
    """
    _check_theta(theta)
    if categorical_features is None:
        categorical_features = d.schema.categorical
    n = len(d)
    out: list[Predicate] = []
    leftover: list[Predicate] = []
    for name in categorical_features:
        col = d.column(name)
        values, counts = np.unique(col.astype(str), return_counts=True)
        rare: list[Predicate] = []
        for value, count in zip(values, counts):
            p = CategoryIn(name, (str(value),))
            (out if _frequent(int(count), n, theta) else rare).append(p)
        if len(rare) > 1:
            merged = either(rare)
            if _frequent(int(merged.mask(d).sum()), n, theta):
                out.append(merged)
            else:
                leftover.append(merged)
        elif len(rare) == 1:
            leftover.append(rare[0])
    out.extend(sweep_leftovers(leftover, lambda p: int(p.mask(d).sum()), n, theta))
    return out


def sweep_leftovers(
    leftover: Sequence[Predicate], count_of, n: int, theta: float
) -> list[Predicate]:
    """Left-to-right merge of rare predicates into frequent disjunctions.

    ``count_of`` maps a predicate to its number of satisfying rows.
    """
    emitted: list[Predicate] = []
    k = 0
    for j in range(1, len(leftover)):
        head = either(leftover[k : j + 1])
        if not _frequent(count_of(head), n, theta):
            continue
        rest = leftover[j + 1 :]
        if rest and _frequent(count_of(either(rest)), n, theta):
            emitted.append(head)
            k = j + 1
        else:
            emitted.append(either(leftover[k:]))
            break
    return emitted


# ---------------------------------------------------------------------------
# numeric features: dependency-based cut-offs
# ---------------------------------------------------------------------------


def min_leaf_for(n: int, theta: float) -> int:
    """Smallest leaf size strictly greater than ``n * theta``."""
    return int(math.floor(n * theta)) + 1


def propose_cutoffs(
    d: Dataset,
    theta: float,
    categorical_features: Sequence[str] | None = None,
    numeric_features: Sequence[str] | None = None,
) -> dict[str, dict[float, float]]:
    """Pool tree cut-offs per numeric feature as ``{tau: best q_tau}``.

    One classification tree per categorical target over all numeric
    features, and one regression tree per numeric target over the other
    numeric features.
    """
    cat = list(d.schema.categorical if categorical_features is None else categorical_features)
    num = list(d.schema.numeric if numeric_features is None else numeric_features)
    n = len(d)
    min_leaf = min_leaf_for(n, theta)
    pooled: dict[str, dict[float, float]] = {name: {} for name in num}

    def add(inputs: list[str], tree) -> None:
        for c in extract_cutoffs(tree):
            name = inputs[c.feature]
            prev = pooled[name].get(c.tau)
            if prev is None or c.q_tau > prev:
                pooled[name][c.tau] = c.q_tau

    if num:
        X = d.numeric_matrix(num)
        for target in cat:
            add(num, fit_classification_tree(X, d.column(target), min_leaf, n))
    for i, target in enumerate(num):
        inputs = num[:i] + num[i + 1 :]
        if not inputs:
            continue
        tree = fit_regression_tree(d.numeric_matrix(inputs), d.column(target), min_leaf, n)
        add(inputs, tree)
    return pooled


def select_cutoffs(
    values: np.ndarray, candidates: Iterable[tuple[float, float]], theta: float
) -> list[float]:
    """Greedy cut-off acceptance in descending ``q_tau`` order.

    The first candidate is always kept. A later candidate is kept only if the
    intervals it would create with its neighbours among the already accepted
    cut-offs both clear ``theta``; edge candidates check only the interval
    toward their single neighbour. Returns the accepted cut-offs ascending.
    """
    ordered = sorted(candidates, key=lambda c: (-c[1], c[0]))
    sorted_values = np.sort(np.asarray(values, dtype=np.float64))
    n = len(sorted_values)

    def count_between(lo: float, hi: float) -> int:
        # rows with lo <= v < hi
        return int(np.searchsorted(sorted_values, hi, "left") - np.searchsorted(sorted_values, lo, "left"))

    accepted: list[float] = []
    for tau, _ in ordered:
        if not accepted:
            accepted.append(tau)
            continue
        k = bisect.bisect_left(accepted, tau)
        if k < len(accepted) and accepted[k] == tau:
            continue
        ok = True
        if k > 0:
            ok = _frequent(count_between(accepted[k - 1], tau), n, theta)
        if ok and k < len(accepted):
            ok = _frequent(count_between(tau, accepted[k]), n, theta)
        if ok:
            accepted.insert(k, tau)
    return accepted


def interval_predicates(feature: str, cutoffs: Sequence[float]) -> list[NumericInterval]:
    """``F<t1``, ``t1<=F<t2``, ..., ``F>=tJ`` for ascending cut-offs."""
    if not cutoffs:
        return []
    out = [NumericInterval(feature, -math.inf, cutoffs[0], False, False)]
    for lo, hi in zip(cutoffs, cutoffs[1:]):
        out.append(NumericInterval(feature, lo, hi, True, False))
    out.append(NumericInterval(feature, cutoffs[-1], math.inf, True, False))
    return out


def generate_numeric_predicates(
    d: Dataset,
    theta: float,
    categorical_features: Sequence[str] | None = None,
    numeric_features: Sequence[str] | None = None,
) -> list[Predicate]:
    _check_theta(theta)
    num = list(d.schema.numeric if numeric_features is None else numeric_features)
    pooled = propose_cutoffs(d, theta, categorical_features, num)
    out: list[Predicate] = []
    for name in num:
        cutoffs = select_cutoffs(d.column(name), pooled[name].items(), theta)
        out.extend(interval_predicates(name, cutoffs))
    return out


# ---------------------------------------------------------------------------
# numeric features: ablation discretizers
# ---------------------------------------------------------------------------


def _nonempty_intervals(d: Dataset, feature: str, cutoffs: Sequence[float]) -> list[Predicate]:
    return [p for p in interval_predicates(feature, cutoffs) if p.mask(d).any()]


def uniform_cutoffs(values: np.ndarray, bins: int = 10) -> list[float]:
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi <= lo:
        return []
    width = (hi - lo) / bins
    return sorted({lo + i * width for i in range(1, bins)})


def generate_uniform_bin_predicates(
    d: Dataset, numeric_features: Sequence[str] | None = None, bins: int = 10
) -> list[Predicate]:
    """Equal-width bins over each feature's observed range; empty bins dropped."""
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    num = d.schema.numeric if numeric_features is None else numeric_features
    out: list[Predicate] = []
    for name in num:
        out.extend(_nonempty_intervals(d, name, uniform_cutoffs(d.column(name), bins)))
    return out


def kmeans_1d(values: np.ndarray, k: int, max_iter: int = 100) -> np.ndarray:
    """Lloyd's algorithm on one dimension; returns sorted centroids.

    Initialization is farthest-point starting from the value closest to the
    median, so results do not depend on a random state. ``k`` is reduced to the
    number of distinct values.
    """
    values = np.asarray(values, dtype=np.float64)
    distinct = np.unique(values)
    k = min(k, len(distinct))
    median = float(np.median(values))
    centroids = [float(distinct[np.argmin(np.abs(distinct - median))])]
    while len(centroids) < k:
        dist = np.min(np.abs(distinct[:, None] - np.array(centroids)[None, :]), axis=1)
        centroids.append(float(distinct[int(np.argmax(dist))]))
    c = np.sort(np.array(centroids))
    for _ in range(max_iter):
        bounds = (c[:-1] + c[1:]) / 2.0
        labels = np.searchsorted(bounds, values, side="right")
        sums = np.bincount(labels, weights=values, minlength=len(c))
        counts = np.bincount(labels, minlength=len(c))
        new = np.where(counts > 0, sums / np.maximum(counts, 1), c)
        new = np.sort(new)
        if np.array_equal(new, c):
            break
        c = new
    return c


def kmeans_cutoffs(values: np.ndarray, bins: int = 10) -> list[float]:
    c = np.unique(kmeans_1d(values, bins))
    return [float(x) for x in (c[:-1] + c[1:]) / 2.0]


def generate_kmeans_bin_predicates(
    d: Dataset, numeric_features: Sequence[str] | None = None, bins: int = 10
) -> list[Predicate]:
    """Bins whose edges are midpoints between sorted 1-D k-means centroids."""
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    num = d.schema.numeric if numeric_features is None else numeric_features
    out: list[Predicate] = []
    for name in num:
        out.extend(_nonempty_intervals(d, name, kmeans_cutoffs(d.column(name), bins)))
    return out


# ---------------------------------------------------------------------------
# full predicate set and transaction encoding
# ---------------------------------------------------------------------------

DISCRETIZERS = ("dependency", "uniform", "kmeans")


def generate_predicates(d: Dataset, theta: float, discretizer: str = "dependency", bins: int = 10) -> list[Predicate]:
    """Categorical predicates followed by numeric ones, in schema feature order."""
    cat = generate_categorical_predicates(d, theta)
    if discretizer == "dependency":
        num = generate_numeric_predicates(d, theta)
    elif discretizer == "uniform":
        num = generate_uniform_bin_predicates(d, bins=bins)
    elif discretizer == "kmeans":
        num = generate_kmeans_bin_predicates(d, bins=bins)
    else:
        raise ValueError(f"unknown discretizer {discretizer!r}; expected one of {DISCRETIZERS}")
    return cat + num


def satisfaction_matrix(d: Dataset, predicates: Sequence[Predicate]) -> np.ndarray:
    """Boolean ``(rows, predicates)`` matrix of which row satisfies which predicate."""
    out = np.zeros((len(d), len(predicates)), dtype=bool)
    for j, p in enumerate(predicates):
        out[:, j] = p.mask(d)
    return out


def encode_transactions(d: Dataset, predicates: Sequence[Predicate]) -> list[tuple[int, ...]]:
    """Per row, the sorted ids of satisfied predicates."""
    matrix = satisfaction_matrix(d, predicates)
    return [tuple(int(i) for i in np.flatnonzero(row)) for row in matrix]


def _check_theta(theta: float) -> None:
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must be in (0, 1), got {theta}")
