"""Top-k violated PARs for a flagged instance.

A PAR is violated when every antecedent predicate holds and the consequent
does not. Rules are pre-sorted by accuracy score, so the top-k violated
rules are the first k violated rules met in a linear scan. The scan is done
with numpy over a per-rulebook index of predicate ids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dataset import Value
from .mining import Par, RuleBook
from .predicates import CategoryIn, NumericInterval, Predicate

DEFAULT_K = 5


def violates(p: Par, x, predicates: Sequence[Predicate], names: Sequence[str] | None = None) -> bool:
    """True iff ``x`` satisfies all of ``p``'s antecedent but not its consequent.

    ``x`` is a feature-name mapping, or a sequence ordered like ``names``.
    """
    if not isinstance(x, Mapping):
        if names is None:
            raise TypeError("positional instances need the schema feature names")
        x = dict(zip(names, x))
    if not all(predicates[a].holds(x) for a in p.antecedent):
        return False
    return not predicates[p.consequent].holds(x)


@dataclass
class Explanation:
    instance: tuple
    pars: list[Par]
    ranks: list[int]
    suspected_features: list[str] = field(default_factory=list)

    @property
    def found(self) -> bool:
        return bool(self.pars)

    def __len__(self) -> int:
        return len(self.pars)


def suspected_features(e: Explanation, predicates: Sequence[Predicate]) -> list[str]:
    """Consequent features in rank order, first occurrence kept."""
    out: list[str] = []
    for par in e.pars:
        for name in predicates[par.consequent].features:
            if name not in out:
                out.append(name)
    return out


@dataclass
class _RuleIndex:
    rules: list
    predicates: list
    n_rules: int
    n_predicates: int
    antecedents: np.ndarray  # (rules, widest antecedent), padded with an always-true slot
    consequents: np.ndarray


def _rule_index(rb: RuleBook) -> _RuleIndex:
    """Build (or reuse) the id arrays for ``rb``.

    The cache is dropped when ``rb.rules`` or ``rb.predicates`` is replaced or
    changes length; rules are otherwise treated as immutable.
    """
    idx = rb.__dict__.get("_rule_index")
    if (
        idx is not None
        and idx.rules is rb.rules
        and idx.predicates is rb.predicates
        and idx.n_rules == len(rb.rules)
        and idx.n_predicates == len(rb.predicates)
    ):
        return idx
    pad = len(rb.predicates)
    width = max((len(r.antecedent) for r in rb.rules), default=0)
    ants = np.full((len(rb.rules), max(width, 1)), pad, dtype=np.int64)
    for i, r in enumerate(rb.rules):
        ants[i, : len(r.antecedent)] = r.antecedent
    cons = np.array([r.consequent for r in rb.rules], dtype=np.int64)
    idx = _RuleIndex(rb.rules, rb.predicates, len(rb.rules), pad, ants, cons)
    rb.__dict__["_rule_index"] = idx
    return idx


def explain(rb: RuleBook, x, k: int = DEFAULT_K) -> Explanation:
    """Scan ``rb.rules`` in order and collect the first ``k`` violated rules.

    ``x`` may be a feature-name mapping or a schema-ordered sequence; missing
    values satisfy no predicate. Fewer than ``k`` (possibly zero) rules are
    returned when the scan runs out.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    instance = rb.schema.coerce(x)
    values = dict(zip(rb.schema.names, instance))
    idx = _rule_index(rb)
    # one evaluation per predicate, plus the always-true padding slot
    sat = np.fromiter((p.holds(values) for p in rb.predicates), dtype=bool, count=idx.n_predicates)
    sat = np.append(sat, True)
    violated = ~sat[idx.consequents] & sat[idx.antecedents].all(axis=1)
    ranks = [int(i) for i in np.flatnonzero(violated)[:k]]
    pars = [rb.rules[i] for i in ranks]
    e = Explanation(instance=instance, pars=pars, ranks=ranks)
    e.suspected_features = suspected_features(e, rb.predicates)
    return e


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def render_rule(par: Par, predicates: Sequence[Predicate]) -> str:
    lhs = ", ".join(predicates[a].render() for a in par.antecedent) or "∅"
    return f"{lhs} -> {predicates[par.consequent].render()}"


def _expectation(p: Predicate) -> str:
    if isinstance(p, CategoryIn):
        if len(p.values) == 1:
            return f"{p.feature} should be {p.values[0]}"
        return f"{p.feature} should be one of {{{', '.join(p.values)}}}"
    if isinstance(p, NumericInterval):
        if math.isinf(p.lo) or math.isinf(p.hi):
            return f"{p.feature} should satisfy {p.render()}"
        return f"{p.feature} should be in the range {p.render()}"
    return f"{p.render()} should hold"


def _actual(features: Sequence[str], values: Mapping[str, Value]) -> str:
    parts = []
    for name in features:
        v = values.get(name)
        if v is None:
            parts.append(f"{name} is missing")
        elif isinstance(v, float):
            parts.append(f"{name}={format(v, '.6g')}")
        else:
            parts.append(f"{name}={v}")
    return ", ".join(parts)


def render_sentence(par: Par, rb: RuleBook, instance: Sequence[Value]) -> str:
    """Plain-language reading of one violated rule for ``instance``.

    e.g. ``If Level>=10 and Pump=ON, then Valve should be Open; however, Valve=Close``
    """
    values = dict(zip(rb.schema.names, instance))
    cons = rb.predicates[par.consequent]
    expected = _expectation(cons)
    actual = _actual(cons.features, values)
    if par.antecedent:
        cond = " and ".join(rb.predicates[a].render() for a in par.antecedent)
        return f"If {cond}, then {expected}; however, {actual}"
    return f"{expected[0].upper()}{expected[1:]}; however, {actual}"


def render_text(e: Explanation, rb: RuleBook, label: str | None = None) -> str:
    lines = [label] if label else []
    if not e.pars:
        lines.append("  NO PAR FOUND")
        return "\n".join(lines)
    for i, (par, rank) in enumerate(zip(e.pars, e.ranks), 1):
        lines.append(
            f"  [{i}] {render_rule(par, rb.predicates)}"
            f"  (support={par.support:.4f}, confidence={par.confidence:.4f}, score={par.score:.4f}, rank={rank})"
        )
        lines.append(f"      {render_sentence(par, rb, e.instance)}")
    lines.append(f"  suspected features: {', '.join(e.suspected_features)}")
    return "\n".join(lines)


def to_machine(e: Explanation, rb: RuleBook) -> dict:
    """Structured form of an explanation, suitable for JSON."""
    return {
        "found": e.found,
        "suspected_features": list(e.suspected_features),
        "pars": [
            {
                "rank": rank,
                "antecedent": [{"id": a, "predicate": rb.predicates[a].render()} for a in par.antecedent],
                "consequent": {"id": par.consequent, "predicate": rb.predicates[par.consequent].render()},
                "support": par.support,
                "confidence": par.confidence,
                "score": par.score,
                "text": render_sentence(par, rb, e.instance),
            }
            for par, rank in zip(e.pars, e.ranks)
        ],
    }
