"""PAR mining: frequent predicate sets, rule generation, scoring, RuleBook.

Supports are kept as integer row counts until a rule is emitted, so every
threshold comparison is a single division.
"""

from __future__ import annotations

import json
import math
import warnings
from collections import defaultdict
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import Dataset, Schema
from .predicates import (
    DISCRETIZERS,
    CategoryIn,
    NumericInterval,
    Predicate,
    predicate_from_dict,
)

FORMAT_NAME = "parexplain-rulebook"
FORMAT_VERSION = 1


def default_theta(n_rows: int) -> float:
    return max(10.0 / n_rows, 0.01)


@dataclass(frozen=True)
class LearningConfig:
    """Hyperparameters for learning a RuleBook.

    ``theta=None`` means ``max(10 / |D|, 0.01)``, resolved when learning.
    """

    theta: float | None = None
    gamma: float = 0.9
    lam: float = 5.0
    max_antecedents: int = 4
    discretizer: str = "dependency"
    bins: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.theta is not None and not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must be in (0, 1), got {self.theta}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        if not self.lam > 0.0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if self.max_antecedents < 1:
            raise ValueError(f"max_antecedents must be >= 1, got {self.max_antecedents}")
        if self.discretizer not in DISCRETIZERS:
            raise ValueError(f"discretizer must be one of {DISCRETIZERS}, got {self.discretizer!r}")
        if self.bins < 2:
            raise ValueError(f"bins must be >= 2, got {self.bins}")

    def resolve(self, n_rows: int) -> LearningConfig:
        if self.theta is not None:
            return self
        return replace(self, theta=default_theta(n_rows))


@dataclass(frozen=True)
class Par:
    antecedent: tuple[int, ...]
    consequent: int
    support: float
    confidence: float
    score: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "antecedent", tuple(sorted(self.antecedent)))
        if self.consequent in self.antecedent:
            raise ValueError("consequent must not appear in the antecedent")

    @property
    def key(self) -> tuple[tuple[int, ...], int]:
        return self.antecedent, self.consequent


def accuracy_score(p: Par, config: LearningConfig) -> float:
    """``(sup - theta) / (1 - theta) + lam * (conf - gamma) / (1 - gamma)``."""
    theta = config.theta
    if theta is None:
        raise ValueError("config.theta is unresolved; call config.resolve(n) first")
    return (p.support - theta) / (1.0 - theta) + config.lam * (p.confidence - config.gamma) / (1.0 - config.gamma)


# ---------------------------------------------------------------------------
# FP-growth
# ---------------------------------------------------------------------------


def min_count_for(n: int, theta: float) -> int:
    """Smallest integer count ``c`` with ``c / n > theta`` (as floats)."""
    c = int(math.floor(theta * n))
    while c > 0 and (c - 1) / n > theta:
        c -= 1
    while c / n <= theta:
        c += 1
    return c


class _Node:
    __slots__ = ("item", "count", "parent", "children")

    def __init__(self, item: int, parent: _Node | None):
        self.item = item
        self.count = 0
        self.parent = parent
        self.children: dict[int, _Node] = {}


class FPTree:
    """Prefix tree over weighted transactions, keeping only frequent items."""

    def __init__(self, paths: Iterable[tuple[Sequence[int], int]], min_count: int):
        paths = list(paths)
        counts: dict[int, int] = defaultdict(int)
        for items, weight in paths:
            for item in items:
                counts[item] += weight
        self.counts = {i: c for i, c in counts.items() if c >= min_count}
        rank = {i: r for r, i in enumerate(sorted(self.counts, key=lambda i: (-self.counts[i], i)))}
        self.rank = rank
        self.root = _Node(-1, None)
        self.header: dict[int, list[_Node]] = defaultdict(list)
        for items, weight in paths:
            kept = sorted((i for i in items if i in rank), key=rank.__getitem__)
            node = self.root
            for item in kept:
                child = node.children.get(item)
                if child is None:
                    child = _Node(item, node)
                    node.children[item] = child
                    self.header[item].append(child)
                child.count += weight
                node = child

    def conditional_paths(self, item: int) -> list[tuple[list[int], int]]:
        out = []
        for node in self.header[item]:
            path = []
            parent = node.parent
            while parent is not None and parent.item != -1:
                path.append(parent.item)
                parent = parent.parent
            if path:
                out.append((path[::-1], node.count))
        return out


def _grow(tree: FPTree, suffix: tuple[int, ...], min_count: int, max_size: int, out: dict) -> None:
    # least frequent first, as in the classic bottom-up header traversal
    for item in sorted(tree.counts, key=lambda i: -tree.rank[i]):
        itemset = suffix + (item,)
        out[frozenset(itemset)] = tree.counts[item]
        if len(itemset) >= max_size:
            continue
        base = tree.conditional_paths(item)
        if not base:
            continue
        sub = FPTree(base, min_count)
        if sub.counts:
            _grow(sub, itemset, min_count, max_size, out)


def fpgrowth_counts(
    transactions: Sequence[Iterable[int]], min_count: int, max_size: int
) -> dict[frozenset, int]:
    """Frequent itemsets (count >= ``min_count``, size <= ``max_size``) with counts."""
    tree = FPTree(((tuple(set(t)), 1) for t in transactions), min_count)
    out: dict[frozenset, int] = {}
    _grow(tree, (), min_count, max_size, out)
    return out


def mine_frequent_predicate_sets(
    transactions: Sequence[Iterable[int]], theta: float, max_size: int
) -> dict[frozenset, float]:
    """Predicate sets of size ``1..max_size`` with support strictly above ``theta``."""
    if not transactions:
        raise ValueError("no transactions to mine")
    if max_size < 1:
        raise ValueError(f"max_size must be >= 1, got {max_size}")
    n = len(transactions)
    counts = fpgrowth_counts(transactions, min_count_for(n, theta), max_size)
    return {k: c / n for k, c in counts.items()}


# ---------------------------------------------------------------------------
# rule generation
# ---------------------------------------------------------------------------


def generate_pars_from_counts(counts: Mapping[frozenset, int], n: int, gamma: float) -> list[Par]:
    """Single-consequent rules ``P - p -> p`` with confidence above ``gamma``."""
    out = []
    for itemset, count in counts.items():
        if len(itemset) < 2:
            continue
        for p in sorted(itemset):
            rest = itemset - {p}
            base = counts.get(rest)
            if base is None:
                raise ValueError(f"frequent-set map lacks subset {sorted(rest)} of {sorted(itemset)}")
            confidence = count / base
            if confidence > gamma:
                out.append(Par(tuple(rest), p, count / n, confidence))
    return out


def generate_pars(frequent: Mapping[frozenset, float], gamma: float) -> list[Par]:
    """Rule generation from a support map (supports as fractions).

    Prefer :func:`generate_pars_from_counts` when counts are available; this
    variant divides supports, which is exact only up to float rounding.
    """
    out = []
    for itemset, sup in frequent.items():
        if len(itemset) < 2:
            continue
        for p in sorted(itemset):
            rest = itemset - {p}
            base = frequent.get(rest)
            if base is None:
                raise ValueError(f"frequent-set map lacks subset {sorted(rest)} of {sorted(itemset)}")
            confidence = sup / base
            if confidence > gamma:
                out.append(Par(tuple(rest), p, sup, confidence))
    return out


def univariate_predicates(d: Dataset) -> list[tuple[Predicate, float]]:
    """Per feature, the in-range predicate and its training coverage.

    Categorical: membership in the seen values. Numeric: the closed interval
    mean +/- 3 population standard deviations.
    """
    out: list[tuple[Predicate, float]] = []
    n = len(d)
    for f in d.schema.features:
        col = d.column(f.name)
        if f.is_numeric:
            mu, sd = float(np.mean(col)), float(np.std(col))
            p: Predicate = NumericInterval(f.name, mu - 3 * sd, mu + 3 * sd, True, True)
        else:
            p = CategoryIn(f.name, tuple(sorted(set(col))))
        out.append((p, int(p.mask(d).sum()) / n))
    return out


def generate_univariate_pars(
    d: Dataset, predicates: list[Predicate] | None = None
) -> tuple[list[Predicate], list[Par]]:
    """Empty-antecedent PARs flagging out-of-range values.

    The consequent predicates are appended to ``predicates`` (reused when an
    identical predicate is already present). Returns the extended predicate
    list and the rules; support and confidence are both the coverage.
    """
    table = list(predicates or [])
    index = {p: i for i, p in enumerate(table)}
    rules = []
    for p, coverage in univariate_predicates(d):
        pid = index.get(p)
        if pid is None:
            pid = len(table)
            table.append(p)
            index[p] = pid
        rules.append(Par((), pid, coverage, coverage))
    return table, rules


def sort_key(p: Par) -> tuple:
    return (-p.score, len(p.antecedent), p.antecedent, p.consequent)


@dataclass
class RuleBook:
    """Learned model: predicate table plus rules sorted by accuracy score."""

    schema: Schema
    predicates: list[Predicate]
    rules: list[Par]
    config: LearningConfig
    n_train: int = 0
    n_mined_predicates: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rules)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "schema": self.schema.to_dict(),
            "config": asdict(self.config),
            "n_train": self.n_train,
            "n_mined_predicates": self.n_mined_predicates,
            "predicates": [{"id": i, **p.to_dict()} for i, p in enumerate(self.predicates)],
            "rules": [
                {
                    "antecedent": list(r.antecedent),
                    "consequent": r.consequent,
                    "support": r.support,
                    "confidence": r.confidence,
                    "score": r.score,
                }
                for r in self.rules
            ],
        }

    def dumps(self) -> str:
        # float repr is the shortest string that round-trips bit-exactly
        return json.dumps(self.to_dict(), indent=1, allow_nan=False) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def from_dict(cls, data: Mapping) -> RuleBook:
        if data.get("format") != FORMAT_NAME:
            raise ValueError(f"not a rulebook document (format={data.get('format')!r})")
        if data.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported rulebook version {data.get('version')!r}")
        preds = []
        for i, entry in enumerate(data["predicates"]):
            if entry["id"] != i:
                raise ValueError(f"predicate ids must be dense; got {entry['id']} at {i}")
            preds.append(predicate_from_dict(entry))
        rules = [
            Par(tuple(r["antecedent"]), int(r["consequent"]), float(r["support"]), float(r["confidence"]), float(r["score"]))
            for r in data["rules"]
        ]
        for r in rules:
            if r.consequent >= len(preds) or any(a >= len(preds) for a in r.antecedent):
                raise ValueError("rule references an unknown predicate id")
        return cls(
            schema=Schema.from_dict(data["schema"]),
            predicates=preds,
            rules=rules,
            config=LearningConfig(**data["config"]),
            n_train=int(data.get("n_train", 0)),
            n_mined_predicates=int(data.get("n_mined_predicates", len(preds))),
        )

    @classmethod
    def loads(cls, text: str) -> RuleBook:
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> RuleBook:
        return cls.loads(Path(path).read_text())


def build_rulebook(
    schema: Schema,
    predicates: list[Predicate],
    mined: Sequence[Par],
    univariate: Sequence[Par],
    config: LearningConfig,
    n_train: int = 0,
    n_mined_predicates: int | None = None,
) -> RuleBook:
    """Score all rules, sort them descending, and drop duplicate rules.

    Ties in score go to fewer antecedents, then to the lexicographically
    smaller id tuple. Of two identical rules the higher-scored copy stays.
    """
    scored = [replace(r, score=accuracy_score(r, config)) for r in (*mined, *univariate)]
    scored.sort(key=sort_key)
    seen = set()
    rules = []
    for r in scored:
        if r.key in seen:
            continue
        seen.add(r.key)
        rules.append(r)
    if not rules:
        warnings.warn("rulebook is empty; every explanation will come back empty", stacklevel=2)
    return RuleBook(
        schema=schema,
        predicates=list(predicates),
        rules=rules,
        config=config,
        n_train=n_train,
        n_mined_predicates=len(predicates) if n_mined_predicates is None else n_mined_predicates,
    )
