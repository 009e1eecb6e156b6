"""Evaluation protocol: rules as detectors, HitRate@P%, PoF, contamination.

All protocols take an already-flagged set of test rows, so any detector (or
plain ground-truth labels) can sit in front of them.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .dataset import Dataset
from .explain import DEFAULT_K, Explanation, explain
from .learner import learn
from .mining import LearningConfig, Par, RuleBook
from .predicates import Predicate, satisfaction_matrix
from . import seeding

NOISE_LEVELS = (0.0, 0.05, 0.10, 0.15, 0.20)
PERTURBATION_NOTE = (
    "numeric: mean +/- Uniform(3, 6) std (training stats); categorical: uniform other seen value"
)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def violation_matrix(pars: Sequence[Par], data: Dataset, predicates: Sequence[Predicate]) -> np.ndarray:
    """Boolean ``(rows, rules)`` matrix of which row violates which rule."""
    used = sorted({i for p in pars for i in (*p.antecedent, p.consequent)})
    cols = {pid: j for j, pid in enumerate(used)}
    sat = satisfaction_matrix(data, [predicates[i] for i in used])
    out = np.zeros((len(data), len(pars)), dtype=bool)
    for r, p in enumerate(pars):
        hit = ~sat[:, cols[p.consequent]]
        for a in p.antecedent:
            hit &= sat[:, cols[a]]
        out[:, r] = hit
    return out


def rules_as_detector(pars: Sequence[Par], data: Dataset, predicates: Sequence[Predicate]) -> np.ndarray:
    """1 for rows violating at least one of ``pars``, else 0."""
    if not pars:
        raise ValueError("rules_as_detector needs at least one rule")
    return violation_matrix(pars, data, predicates).any(axis=1).astype(np.int64)


def precision_recall_f1(preds: Sequence[int], labels: Sequence[int]) -> tuple[float, float, float]:
    preds = np.asarray(preds).astype(bool)
    labels = np.asarray(labels).astype(bool)
    if preds.shape != labels.shape:
        raise ValueError("preds and labels differ in length")
    tp = int(np.sum(preds & labels))
    fp = int(np.sum(preds & ~labels))
    fn = int(np.sum(~preds & labels))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def hit_rate(ground_truth: Iterable[str], suspects: Sequence[str], p: int = 100) -> float:
    """Share of ground-truth features among the first ``floor(p% * |gt|)`` suspects."""
    gt = set(ground_truth)
    if not gt:
        raise ValueError("ground truth must be non-empty")
    window = math.floor(p * len(gt) / 100)
    return len(gt & set(suspects[:window])) / len(gt)


def pof(explanations: Sequence[Explanation], is_tp: Sequence[bool]) -> tuple[float | None, float | None]:
    """Probability of finding at least one PAR, split into (TPs, FPs).

    A class with no members gives None (reported as "n.a").
    """
    if len(explanations) != len(is_tp):
        raise ValueError("explanations and labels differ in length")
    found = np.array([e.found for e in explanations], dtype=bool)
    tp = np.asarray(is_tp, dtype=bool)

    def rate(mask: np.ndarray) -> float | None:
        return float(found[mask].mean()) if mask.any() else None

    return rate(tp), rate(~tp)


def fmt_rate(value: float | None) -> str:
    return "n.a" if value is None else f"{value:.4f}"


# ---------------------------------------------------------------------------
# perturbation and contamination
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PerturbedInstance:
    instance: tuple
    ground_truth_features: frozenset
    source_row: int


@dataclass
class FeatureStats:
    mean: dict[str, float]
    std: dict[str, float]
    categories: dict[str, list[str]]

    @classmethod
    def of(cls, d: Dataset) -> FeatureStats:
        num = d.schema.numeric
        return cls(
            mean={n: float(np.mean(d.column(n))) for n in num},
            std={n: float(np.std(d.column(n))) for n in num},
            categories={n: sorted(set(d.column(n))) for n in d.schema.categorical},
        )


def perturb_row(
    row: Sequence, names: Sequence[str], stats: FeatureStats, rng: np.random.Generator
) -> tuple[tuple, frozenset] | None:
    """Perturb 1-3 random features of ``row``; None if nothing is perturbable."""
    perturbable = []
    for j, name in enumerate(names):
        if name in stats.categories:
            if any(c != row[j] for c in stats.categories[name]):
                perturbable.append(j)
        elif stats.std[name] > 0.0:
            perturbable.append(j)
    if not perturbable:
        return None
    m = min(int(rng.integers(1, 4)), len(perturbable))
    chosen = sorted(int(j) for j in rng.choice(perturbable, size=m, replace=False))
    out = list(row)
    for j in chosen:
        name = names[j]
        if name in stats.categories:
            others = [c for c in stats.categories[name] if c != row[j]]
            out[j] = others[int(rng.integers(len(others)))]
        else:
            sign = 1.0 if rng.random() < 0.5 else -1.0
            offset = rng.uniform(3.0 * stats.std[name], 6.0 * stats.std[name])
            out[j] = stats.mean[name] + sign * offset
    return tuple(out), frozenset(names[j] for j in chosen)


def perturb_normals(
    test_normals: Dataset, seed: int, reference: Dataset | None = None
) -> list[PerturbedInstance]:
    """Create ground-truth anomalies by perturbing 1-3 features per row.

    Statistics (mean, std, seen categories) come from ``reference``,
    normally the training data; it defaults to ``test_normals``.
    """
    if len(test_normals) == 0:
        raise ValueError("no normal instances to perturb")
    stats = FeatureStats.of(reference if reference is not None else test_normals)
    rng = np.random.default_rng(seed)
    names = test_normals.schema.names
    out = []
    for i, row in enumerate(test_normals):
        result = perturb_row(row, names, stats, rng)
        if result is not None:
            out.append(PerturbedInstance(result[0], result[1], i))
    return out


def contaminate_training(train: Dataset, proportion: float, seed: int) -> Dataset:
    """Replace ``floor(proportion * n)`` random rows by perturbed copies."""
    if not 0.0 <= proportion <= 0.2:
        raise ValueError(f"proportion must be in [0, 0.2], got {proportion}")
    k = int(math.floor(proportion * len(train) + 1e-9))
    if k == 0:
        return train
    rng = np.random.default_rng(seed)
    stats = FeatureStats.of(train)
    names = train.schema.names
    rows = train.rows
    for i in rng.choice(len(train), size=k, replace=False):
        result = perturb_row(rows[i], names, stats, rng)
        if result is not None:
            rows[i] = result[0]
    return Dataset.from_rows(train.schema, rows)


# ---------------------------------------------------------------------------
# protocols
# ---------------------------------------------------------------------------


@dataclass
class InstanceRecord:
    instance_id: int
    outcome: str
    n_pars: int
    explain_seconds: float
    hitrate100: float | None = None
    hitrate150: float | None = None
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    suspected: str = ""


@dataclass
class EvalReport:
    mode: str
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    hitrate100: float | None = None
    hitrate150: float | None = None
    pof_tp: float | None = None
    pof_fp: float | None = None
    mean_explain_time: float | None = None
    n_flagged: int = 0
    n_evaluated: int = 0
    notes: dict = field(default_factory=dict)
    records: list[InstanceRecord] = field(default_factory=list, repr=False)
    sweep: list[dict] = field(default_factory=list)

    def summary(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k not in ("records",)}
        return out

    def lines(self) -> list[str]:
        out = [f"mode: {self.mode}"]
        labels = [
            ("precision", "Avg. precision"),
            ("recall", "Avg. recall"),
            ("f1", "Avg. F1"),
            ("hitrate100", "HitRate@100%"),
            ("hitrate150", "HitRate@150%"),
        ]
        for key, label in labels:
            value = getattr(self, key)
            if value is not None:
                out.append(f"{label}: {value:.4f}")
        if self.mode in ("pof", "noise") or self.pof_tp is not None or self.pof_fp is not None:
            out.append(f"PoF@TPs: {fmt_rate(self.pof_tp)}")
            out.append(f"PoF@FPs: {fmt_rate(self.pof_fp)}")
        if self.mean_explain_time is not None:
            out.append(f"Avg. explain time (secs): {self.mean_explain_time:.6f}")
        out.append(f"flagged: {self.n_flagged}, evaluated: {self.n_evaluated}")
        for level in self.sweep:
            out.append(
                "noise {noise:.2f}: PoF@TPs={pof} precision={p} recall={r} f1={f} rules={rules}".format(
                    noise=level["noise"],
                    pof=fmt_rate(level["pof_tp"]),
                    p=fmt_rate(level["precision"]),
                    r=fmt_rate(level["recall"]),
                    f=fmt_rate(level["f1"]),
                    rules=level["n_rules"],
                )
            )
        for key, value in self.notes.items():
            out.append(f"note[{key}]: {value}")
        return out

    def write_records(self, path: str | Path) -> None:
        names = list(InstanceRecord.__dataclass_fields__)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(names)
            for r in self.records:
                writer.writerow(["" if getattr(r, n) is None else getattr(r, n) for n in names])


def _timed_explain(rb: RuleBook, x, k: int) -> tuple[Explanation, float]:
    start = time.perf_counter()
    e = explain(rb, x, k)
    return e, time.perf_counter() - start


def _mean(values: Sequence[float]) -> float | None:
    return float(np.mean(values)) if len(values) else None


def rules_accuracy(
    rb: RuleBook, test: Dataset, labels: Sequence[int], flagged: Sequence[int], k: int = DEFAULT_K
) -> EvalReport:
    """Top-k PARs of each flagged row, used as a detector on the other test rows.

    Flagged rows with no violated PAR are skipped (they give no detector);
    the rest are macro-averaged.
    """
    labels = np.asarray(labels, dtype=np.int64)
    report = EvalReport(mode="rules-accuracy", n_flagged=len(flagged))
    precisions, recalls, f1s, times = [], [], [], []
    cache: dict[tuple[tuple[int, ...], int], np.ndarray] = {}
    for i in flagged:
        e, secs = _timed_explain(rb, test.row(int(i)), k)
        times.append(secs)
        rec = InstanceRecord(int(i), "TP" if labels[i] == 1 else "FP", len(e), secs)
        rec.suspected = "|".join(e.suspected_features)
        if e.found:
            missing = [p for p in e.pars if p.key not in cache]
            if missing:
                cols = violation_matrix(missing, test, rb.predicates)
                for j, p in enumerate(missing):
                    cache[p.key] = cols[:, j]
            preds = np.zeros(len(test), dtype=bool)
            for p in e.pars:
                preds |= cache[p.key]
            keep = np.ones(len(test), dtype=bool)
            keep[int(i)] = False
            rec.precision, rec.recall, rec.f1 = precision_recall_f1(preds[keep], labels[keep])
            precisions.append(rec.precision)
            recalls.append(rec.recall)
            f1s.append(rec.f1)
        report.records.append(rec)
    report.precision, report.recall, report.f1 = _mean(precisions), _mean(recalls), _mean(f1s)
    report.mean_explain_time = _mean(times)
    report.n_evaluated = len(f1s)
    return report


def pof_report(
    rb: RuleBook, test: Dataset, labels: Sequence[int], flagged: Sequence[int], k: int = DEFAULT_K
) -> EvalReport:
    labels = np.asarray(labels, dtype=np.int64)
    report = EvalReport(mode="pof", n_flagged=len(flagged))
    explanations, tps, times = [], [], []
    for i in flagged:
        e, secs = _timed_explain(rb, test.row(int(i)), k)
        explanations.append(e)
        tps.append(bool(labels[i] == 1))
        times.append(secs)
        rec = InstanceRecord(int(i), "TP" if labels[i] == 1 else "FP", len(e), secs)
        rec.suspected = "|".join(e.suspected_features)
        report.records.append(rec)
    report.pof_tp, report.pof_fp = pof(explanations, tps)
    report.mean_explain_time = _mean(times)
    report.n_evaluated = len(explanations)
    return report


def hitrate_report(
    rb: RuleBook,
    perturbed: Sequence[PerturbedInstance],
    flagged: Sequence[bool] | None = None,
    k: int = DEFAULT_K,
) -> EvalReport:
    """HitRate@100% and @150% over perturbed rows that the detector flagged."""
    flagged = [True] * len(perturbed) if flagged is None else list(flagged)
    report = EvalReport(mode="hitrate", n_flagged=int(sum(flagged)), notes={"perturbation": PERTURBATION_NOTE})
    h100, h150, times = [], [], []
    for i, (item, hit) in enumerate(zip(perturbed, flagged)):
        if not hit:
            continue
        e, secs = _timed_explain(rb, item.instance, k)
        times.append(secs)
        rec = InstanceRecord(i, "TP", len(e), secs)
        rec.hitrate100 = hit_rate(item.ground_truth_features, e.suspected_features, 100)
        rec.hitrate150 = hit_rate(item.ground_truth_features, e.suspected_features, 150)
        rec.suspected = "|".join(e.suspected_features)
        h100.append(rec.hitrate100)
        h150.append(rec.hitrate150)
        report.records.append(rec)
    report.hitrate100, report.hitrate150 = _mean(h100), _mean(h150)
    report.mean_explain_time = _mean(times)
    report.n_evaluated = len(h100)
    return report


def noise_sweep(
    train: Dataset,
    test: Dataset,
    labels: Sequence[int],
    flag: Callable[[Dataset, Dataset], Sequence[int]],
    config: LearningConfig,
    seed: int,
    levels: Sequence[float] = NOISE_LEVELS,
    k: int = DEFAULT_K,
) -> EvalReport:
    """Relearn on contaminated training data at each level and re-evaluate.

    ``flag(train, test)`` returns the flagged test row indices; it is called
    with the contaminated training set so a detector can be refit.
    """
    report = EvalReport(mode="noise", notes={"perturbation": PERTURBATION_NOTE})
    for level in levels:
        dirty = contaminate_training(train, level, seeding.derive(seed, f"noise-{level:.4f}"))
        rb = learn(dirty, config)
        flagged = list(flag(dirty, test))
        acc = rules_accuracy(rb, test, labels, flagged, k)
        found = pof_report(rb, test, labels, flagged, k)
        report.sweep.append(
            {
                "noise": level,
                "n_rules": len(rb.rules),
                "pof_tp": found.pof_tp,
                "pof_fp": found.pof_fp,
                "precision": acc.precision,
                "recall": acc.recall,
                "f1": acc.f1,
            }
        )
    if report.sweep:
        first = report.sweep[0]
        report.pof_tp, report.pof_fp = first["pof_tp"], first["pof_fp"]
        report.precision, report.recall, report.f1 = first["precision"], first["recall"], first["f1"]
    return report
