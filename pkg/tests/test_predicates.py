import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_dataset
from parexplain.dataset import Dataset, Schema
from parexplain.predicates import (
    CategoryIn,
    Disjunction,
    NumericInterval,
    either,
    encode_transactions,
    generate_categorical_predicates,
    generate_kmeans_bin_predicates,
    generate_numeric_predicates,
    generate_predicates,
    generate_uniform_bin_predicates,
    interval_predicates,
    kmeans_cutoffs,
    min_leaf_for,
    predicate_from_dict,
    propose_cutoffs,
    satisfies,
    select_cutoffs,
    support,
    sweep_leftovers,
    uniform_cutoffs,
)


def cat_data(counts: dict[str, int], name="F") -> Dataset:
    values = [v for v, c in counts.items() for _ in range(c)]
    return Dataset(Schema.from_pairs([(name, "categorical")]), {name: np.array(values, dtype=object)})


# -- semantics --------------------------------------------------------------


def test_satisfies_examples():
    assert not satisfies(CategoryIn("Valve", ("Open",)), {"Valve": "Close"})
    assert satisfies(NumericInterval("Level", 10.0, math.inf, False, False), {"Level": 11.1})
    assert not satisfies(NumericInterval("F", 3.0, 5.0), {"F": 5.0})
    assert satisfies(NumericInterval("F", 3.0, 5.0), {"F": 3.0})


def test_missing_values_satisfy_nothing():
    assert not satisfies(CategoryIn("a", ("x",)), {"a": None})
    assert not satisfies(NumericInterval("b"), {})
    assert not satisfies(either([CategoryIn("a", ("x",)), NumericInterval("b")]), {"a": None})


def test_disjunction_spans_features():
    p = either([CategoryIn("A", ("x",)), CategoryIn("B", ("y",))])
    assert isinstance(p, Disjunction)
    assert p.render() == "A=x|B=y"
    assert p.features == ("A", "B")
    assert satisfies(p, {"A": "z", "B": "y"})
    assert not satisfies(p, {"A": "z", "B": "z"})


def test_either_flattens_and_unwraps():
    a, b, c = (CategoryIn("F", (v,)) for v in "abc")
    assert either([a]) is a
    assert either([either([a, b]), c]).parts == (a, b, c)


def test_render_forms():
    assert CategoryIn("Pump", ("ON",)).render() == "Pump=ON"
    assert NumericInterval("Level", -math.inf, 10.0).render() == "Level<10"
    assert NumericInterval("Level", 10.0, math.inf).render() == "Level>=10"
    assert NumericInterval("AIT202", 8.21, 8.84).render() == "8.21<=AIT202<8.84"


def test_invariants():
    with pytest.raises(ValueError):
        CategoryIn("a", ())
    with pytest.raises(ValueError):
        NumericInterval("a", 2.0, 1.0)
    with pytest.raises(ValueError):
        Disjunction((CategoryIn("a", ("x",)),))


@pytest.mark.parametrize(
    "p",
    [
        CategoryIn("a", ("y", "x")),
        NumericInterval("b", -math.inf, 0.1 + 0.2),
        NumericInterval("b", -1.5, 2.25, False, True),
        either([CategoryIn("a", ("x",)), NumericInterval("b", 1.0, math.inf)]),
    ],
)
def test_dict_roundtrip(p):
    assert predicate_from_dict(p.to_dict()) == p


# -- categorical generation -------------------------------------------------


def test_two_frequent_values():
    preds = generate_categorical_predicates(cat_data({"ON": 60, "OFF": 40}), 0.01)
    assert preds == [CategoryIn("F", ("OFF",)), CategoryIn("F", ("ON",))]


def test_rare_pair_stays_in_leftover():
    preds = generate_categorical_predicates(cat_data({"a": 993, "b": 4, "c": 3}), 0.01)
    assert preds == [CategoryIn("F", ("a",))]


def test_rare_pair_merged_when_frequent():
    preds = generate_categorical_predicates(cat_data({"a": 980, "b": 12, "c": 8}), 0.01)
    assert CategoryIn("F", ("b",)) in preds
    assert CategoryIn("F", ("c",)) not in preds and len(preds) == 2
    preds = generate_categorical_predicates(cat_data({"a": 986, "b": 7, "c": 7}), 0.01)
    assert preds[-1] == either([CategoryIn("F", ("b",)), CategoryIn("F", ("c",))])


def _sweep(counts, n=1000, theta=0.01):
    leftover = [CategoryIn(f"F{i}", ("v",)) for i in range(len(counts))]
    count = dict(zip(leftover, counts))

    def count_of(p):
        parts = p.parts if isinstance(p, Disjunction) else (p,)
        return sum(count[q] for q in parts)

    return leftover, sweep_leftovers(leftover, count_of, n, theta)


def test_sweep_three_small_leftovers_absorbed():
    leftover, out = _sweep([4, 4, 4])
    assert out == [either(leftover)]


def test_sweep_emits_when_tail_can_stand_alone():
    leftover, out = _sweep([6, 6, 6, 6])
    assert out == [either(leftover[:2]), either(leftover[2:])]


def test_sweep_tail_absorption():
    leftover, out = _sweep([6, 6, 6])
    assert out == [either(leftover)]


def test_sweep_nothing_frequent():
    _, out = _sweep([2, 3, 4])
    assert out == []


def test_cross_feature_sweep_end_to_end():
    n = 1000
    cols = {
        "A": np.array(["rare"] * 5 + ["a"] * 995, dtype=object),
        "B": np.array(["b"] * 994 + ["rare"] * 6, dtype=object),
    }
    d = Dataset(Schema.from_pairs([("A", "categorical"), ("B", "categorical")]), cols)
    preds = generate_categorical_predicates(d, 0.01)
    assert preds[-1] == either([CategoryIn("A", ("rare",)), CategoryIn("B", ("rare",))])
    assert support(preds[-1], d) == 11 / n


# -- numeric generation -----------------------------------------------------


def test_min_leaf():
    assert min_leaf_for(800, 0.0125) == 11
    assert min_leaf_for(100, 0.1) == 11
    assert min_leaf_for(1000, 0.01) == 11


def test_figure_one_rejection():
    values = np.concatenate([np.linspace(0, 2.9, 50), [3.5], np.linspace(5, 10, 49)])
    assert select_cutoffs(values, [(5.0, 0.9), (3.0, 0.5)], 0.02) == [5.0]


def test_uniform_example_close_cutoff_rejected():
    values = np.random.default_rng(0).uniform(0, 1, 1000)
    assert select_cutoffs(values, [(0.5, 0.9), (0.505, 0.8)], 0.01) == [0.5]


def test_single_candidate_gives_two_predicates():
    values = np.arange(100.0)
    cuts = select_cutoffs(values, [(49.5, 0.3)], 0.01)
    assert interval_predicates("F", cuts) == [
        NumericInterval("F", -math.inf, 49.5, False, False),
        NumericInterval("F", 49.5, math.inf, True, False),
    ]


def test_higher_q_never_cancelled():
    values = np.arange(100.0)
    # 50.5 arrives second but cannot displace 50
    assert select_cutoffs(values, [(50.0, 0.9), (50.5, 0.8), (20.0, 0.1)], 0.05) == [20.0, 50.0]


def test_duplicate_cutoffs_keep_max_q():
    rng = np.random.default_rng(1)
    x = rng.uniform(0, 10, 300)
    d = Dataset(
        Schema.from_pairs([("x", "numeric"), ("c1", "categorical"), ("c2", "categorical")]),
        {"x": x, "c1": np.where(x > 5, "a", "b"), "c2": np.where(x > 5, "u", "v")},
    )
    pooled = propose_cutoffs(d, 0.01)
    assert len(pooled["x"]) == 1


def test_constant_numeric_yields_nothing():
    d = Dataset(Schema.from_pairs([("x", "numeric"), ("c", "categorical")]), {"x": np.ones(50), "c": np.array(["a", "b"] * 25)})
    assert generate_numeric_predicates(d, 0.01) == []


def test_single_numeric_skips_regression():
    x = np.arange(100.0)
    d = Dataset(Schema.from_pairs([("x", "numeric")]), {"x": x})
    assert generate_numeric_predicates(d, 0.01) == []


def _all_numeric_supports_exceed_theta(d, theta):
    for p in generate_predicates(d, theta):
        assert support(p, d) > theta, p.render()


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    n=st.integers(20, 150),
    n_num=st.integers(1, 3),
    n_cat=st.integers(0, 2),
    theta=st.sampled_from([0.01, 0.05, 0.1]),
)
def test_generated_predicates_exceed_theta(seed, n, n_num, n_cat, theta):
    d = random_dataset(np.random.default_rng(seed), n, n_num, n_cat, n_values=6)
    _all_numeric_supports_exceed_theta(d, theta)


def test_synthetic_predicates_exceed_theta(tank_split):
    train = tank_split[0]
    theta = max(10 / len(train), 0.01)
    _all_numeric_supports_exceed_theta(train, theta)


def test_planted_level_cutoff_found(tank_split):
    train = tank_split[0]
    preds = generate_numeric_predicates(train, max(10 / len(train), 0.01))
    level = [p for p in preds if p.feature == "Level"]
    assert len(level) == 2
    assert 9.5 < level[0].hi < 10.5


# -- ablation discretizers --------------------------------------------------


def test_uniform_bins_range():
    d = Dataset(Schema.from_pairs([("x", "numeric")]), {"x": np.arange(11.0)})
    assert uniform_cutoffs(d.column("x"), 10) == pytest.approx([1, 2, 3, 4, 5, 6, 7, 8, 9])
    assert len(generate_uniform_bin_predicates(d, bins=10)) == 10


def test_uniform_constant_feature():
    d = Dataset(Schema.from_pairs([("x", "numeric")]), {"x": np.full(5, 2.0)})
    assert generate_uniform_bin_predicates(d) == []


def test_uniform_skewed_supports_counted_exactly():
    x = np.concatenate([np.zeros(90), np.full(5, 5.0), np.full(5, 10.0)])
    d = Dataset(Schema.from_pairs([("x", "numeric")]), {"x": x})
    preds = generate_uniform_bin_predicates(d, bins=4)
    assert [round(support(p, d), 10) for p in preds] == [0.9, 0.05, 0.05]


def test_kmeans_two_clusters():
    x = np.array([0.0] * 10 + [100.0] * 10)
    assert kmeans_cutoffs(x, 2) == [50.0]


def test_kmeans_k_reduced_to_distinct():
    x = np.array([1.0, 1.0, 2.0, 3.0])
    assert len(kmeans_cutoffs(x, 10)) == 2


def test_kmeans_deterministic():
    x = np.random.default_rng(3).normal(size=200)
    d = Dataset(Schema.from_pairs([("x", "numeric")]), {"x": x})
    assert generate_kmeans_bin_predicates(d) == generate_kmeans_bin_predicates(d)


def test_unknown_discretizer():
    d = Dataset(Schema.from_pairs([("x", "numeric")]), {"x": np.arange(5.0)})
    with pytest.raises(ValueError):
        generate_predicates(d, 0.1, "magic")


# -- transactions -----------------------------------------------------------


def test_empty_transaction():
    d = Dataset(Schema.from_pairs([("x", "numeric")]), {"x": np.array([1.0])})
    assert encode_transactions(d, [NumericInterval("x", 5.0, 6.0)]) == [()]


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_transactions_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    d = random_dataset(rng, 20, 2, 2)
    preds = generate_predicates(d, 0.05) + generate_uniform_bin_predicates(d, bins=3)
    tx = encode_transactions(d, preds)
    names = d.schema.names
    for row, t in zip(d, tx):
        assert t == tuple(i for i, p in enumerate(preds) if satisfies(p, row, names))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_one_interval_per_numeric_feature(seed):
    d = random_dataset(np.random.default_rng(seed), 60, 3, 1)
    preds = generate_numeric_predicates(d, 0.02)
    for t in encode_transactions(d, preds):
        features = [preds[i].feature for i in t]
        assert len(features) == len(set(features))
