import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from parexplain.dataset import Dataset, Schema, split  # noqa: E402
from parexplain.learner import learn  # noqa: E402
from parexplain.synth import water_tank  # noqa: E402


@pytest.fixture(scope="session")
def tank():
    return water_tank(1000, 50, seed=0)


@pytest.fixture(scope="session")
def tank_split(tank):
    """(train normals, test normals, anomalies)."""
    train, test = split(tank.normals, 0.8, seed=0)
    return train, test, tank.anomalies


@pytest.fixture(scope="session")
def tank_model(tank_split):
    return learn(tank_split[0])


@pytest.fixture
def mixed_schema():
    return Schema.from_pairs([("a", "numeric"), ("b", "categorical"), ("c", "numeric")])


def random_dataset(rng, n_rows, n_num, n_cat, n_values=3):
    pairs = [(f"x{i}", "numeric") for i in range(n_num)] + [(f"c{i}", "categorical") for i in range(n_cat)]
    schema = Schema.from_pairs(pairs)
    cols = {}
    for i in range(n_num):
        cols[f"x{i}"] = rng.normal(size=n_rows).round(2)
    for i in range(n_cat):
        cols[f"c{i}"] = np.array([f"v{v}" for v in rng.integers(0, n_values, n_rows)], dtype=object)
    return Dataset(schema, cols)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number])
