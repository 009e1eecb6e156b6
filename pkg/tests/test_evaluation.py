import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parexplain.dataset import Dataset, Schema
from parexplain.explain import Explanation, violates
from parexplain.evaluation import (
    NOISE_LEVELS,
    FeatureStats,
    contaminate_training,
    hit_rate,
    hitrate_report,
    noise_sweep,
    perturb_normals,
    perturb_row,
    pof,
    pof_report,
    precision_recall_f1,
    rules_accuracy,
    rules_as_detector,
)
from parexplain.mining import LearningConfig, Par


def test_prf_examples():
    assert precision_recall_f1([1, 0, 1], [1, 0, 1]) == (1.0, 1.0, 1.0)
    assert precision_recall_f1([0, 0, 0], [1, 0, 1]) == (0.0, 0.0, 0.0)
    p, r, f = precision_recall_f1([1, 1, 1, 0, 0], [1, 1, 0, 1, 1])
    assert (p, r) == (pytest.approx(2 / 3), 0.5) and f == pytest.approx(4 / 7)
    with pytest.raises(ValueError):
        precision_recall_f1([1], [1, 0])


def test_hit_rate_examples():
    assert hit_rate({2, 6}, [2, 3, 6, 1, 5, 4], 100) == 0.5
    assert hit_rate({2, 6}, [2, 3, 6, 1, 5, 4], 150) == 1.0
    assert hit_rate({2}, [], 100) == 0.0
    with pytest.raises(ValueError):
        hit_rate(set(), [1], 100)


@settings(max_examples=60, deadline=None)
@given(
    gf=st.sets(st.integers(0, 9), min_size=1, max_size=4),
    suspects=st.lists(st.integers(0, 9), unique=True, max_size=10),
    extra=st.lists(st.integers(10, 20), max_size=5),
    p=st.sampled_from([100, 150]),
)
def test_hit_rate_ignores_suspects_past_window(gf, suspects, extra, p):
    window = (p * len(gf)) // 100
    head = suspects[:window]
    assert hit_rate(gf, head + extra, p) == hit_rate(gf, suspects, p)
    assert 0.0 <= hit_rate(gf, suspects, p) <= 1.0


def _explanations(found):
    return [Explanation((), [Par((), 0, 1.0, 1.0)] if f else [], [0] if f else []) for f in found]


def test_pof_examples():
    assert pof(_explanations([True, True]), [True, True]) == (1.0, None)
    assert pof(_explanations([True, True, True, False]), [True] * 4)[0] == 0.75
    assert pof(_explanations([False, True]), [True, False]) == (0.0, 1.0)


def test_rules_as_detector(tank_model, tank_split):
    _, test, anomalies = tank_split
    rb = tank_model
    data = Dataset.from_rows(rb.schema, test.rows + anomalies.rows)
    pars = [r for r in rb.rules if r.antecedent][:5]
    preds = rules_as_detector(pars, data, rb.predicates)
    names = rb.schema.names
    expected = [int(any(violates(p, x, rb.predicates, names) for p in pars)) for x in data]
    assert list(preds) == expected
    with pytest.raises(ValueError):
        rules_as_detector([], data, rb.predicates)


@settings(max_examples=20, deadline=None)
@given(picks=st.lists(st.integers(0, 200), min_size=1, max_size=6, unique=True), extra=st.integers(0, 200))
def test_rules_as_detector_monotone(tank_model, tank_split, picks, extra):
    rb = tank_model
    data = tank_split[1]
    pool = rb.rules[: 201]
    base = rules_as_detector([pool[i % len(pool)] for i in picks], data, rb.predicates)
    more = rules_as_detector([pool[i % len(pool)] for i in picks] + [pool[extra % len(pool)]], data, rb.predicates)
    assert np.all(more >= base)


def numeric_data(n=200, seed=0):
    schema = Schema.from_pairs([("x", "numeric"), ("c", "categorical")])
    rng = np.random.default_rng(seed)
    return Dataset(schema, {"x": rng.normal(size=n), "c": np.array(["ON", "OFF"] * (n // 2), dtype=object)})


def test_perturbation_bounds():
    d = numeric_data(1000)
    stats = FeatureStats.of(d)
    rng = np.random.default_rng(0)
    for x in d:
        out, gt = perturb_row(x, d.schema.names, stats, rng)
        assert 1 <= len(gt) <= 2
        if "x" in gt:
            z = abs(out[0] - stats.mean["x"]) / stats.std["x"]
            assert 3.0 <= z <= 6.0
        else:
            assert out[0] == x[0]
        if "c" in gt:
            assert out[1] != x[1] and out[1] in ("ON", "OFF")


def test_perturbation_m_is_uniform():
    schema = Schema.from_pairs([(f"x{i}", "numeric") for i in range(4)])
    d = Dataset(schema, {f"x{i}": np.random.default_rng(i).normal(size=10_000) for i in range(4)})
    sizes = np.array([len(p.ground_truth_features) for p in perturb_normals(d, seed=5)])
    n = len(sizes)
    for m in (1, 2, 3):
        count = int(np.sum(sizes == m))
        assert abs(count - n / 3) <= 3 * np.sqrt(n * (1 / 3) * (2 / 3))


def test_unperturbable_features_skipped():
    schema = Schema.from_pairs([("c", "categorical"), ("x", "numeric")])
    d = Dataset.from_rows(schema, [("only", 1.0)] * 10)
    assert perturb_normals(d, seed=0) == []
    d2 = Dataset.from_rows(schema, [("only", float(i)) for i in range(10)])
    out = perturb_normals(d2, seed=0)
    assert len(out) == 10 and all(p.ground_truth_features == {"x"} for p in out)


def test_perturb_normals_deterministic_and_rejects_empty():
    d = numeric_data()
    assert perturb_normals(d, 3) == perturb_normals(d, 3)
    with pytest.raises(ValueError):
        perturb_normals(d.take([]), 0)


def test_contamination_cardinality():
    d = numeric_data(1000)
    assert contaminate_training(d, 0.0, 1) == d
    dirty = contaminate_training(d, 0.1, 1)
    changed = sum(a != b for a, b in zip(d, dirty))
    assert changed == 100
    with pytest.raises(ValueError):
        contaminate_training(d, 0.3, 1)


def _tank_eval(tank_model, tank_split):
    _, test, anomalies = tank_split
    data = Dataset.from_rows(tank_model.schema, test.rows + anomalies.rows)
    labels = np.array([0] * len(test) + [1] * len(anomalies))
    return data, labels, list(np.flatnonzero(labels == 1))


def test_rules_accuracy_protocol(tank_model, tank_split, tmp_path):
    data, labels, flagged = _tank_eval(tank_model, tank_split)
    report = rules_accuracy(tank_model, data, labels, flagged)
    assert report.n_evaluated == len(flagged)
    assert report.f1 >= 0.9
    report.write_records(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert len(lines) == len(flagged) + 1
    assert lines[0].startswith("instance_id,outcome,n_pars")


def test_pof_report_without_fps(tank_model, tank_split):
    data, labels, flagged = _tank_eval(tank_model, tank_split)
    report = pof_report(tank_model, data, labels, flagged)
    assert report.pof_tp == 1.0
    assert "PoF@FPs: n.a" in report.lines()


def test_hitrate_report_on_perturbed(tank_model, tank_split):
    train, test, _ = tank_split
    perturbed = perturb_normals(test, seed=2, reference=train)
    report = hitrate_report(tank_model, perturbed)
    assert report.n_evaluated == len(perturbed)
    assert 0.0 <= report.hitrate100 <= report.hitrate150 <= 1.0
    skip = hitrate_report(tank_model, perturbed, [False] * len(perturbed))
    assert skip.n_evaluated == 0 and skip.hitrate100 is None


def test_noise_sweep_levels(tank_model, tank_split):
    train = tank_split[0]
    data, labels, flagged = _tank_eval(tank_model, tank_split)
    report = noise_sweep(train, data, labels, lambda tr, te: flagged, LearningConfig(), seed=0, levels=(0.0, 0.1))
    assert [s["noise"] for s in report.sweep] == [0.0, 0.1]
    assert NOISE_LEVELS == (0.0, 0.05, 0.10, 0.15, 0.20)
