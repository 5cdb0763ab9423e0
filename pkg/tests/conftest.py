import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from minshap import Dataset, RngStream, SimConfig, generate


@pytest.fixture(scope="session")
def chain_data():
    """Chain-model sample large enough for the analytic values to show."""
    data, truth = generate(SimConfig(model="chain", n=100000, seed=101), RngStream(101))
    return data, truth


@pytest.fixture()
def small_linear():
    """Tiny exactly-linear dataset: y = 2 x1 - x2 + 0.5, no noise."""
    gen = np.random.default_rng(42)
    X = gen.standard_normal((60, 3))
    y = 2.0 * X[:, 0] - X[:, 1] + 0.5
    return Dataset(X, ("a", "b", "c"), y)


@pytest.fixture()
def noisy_data():
    gen = np.random.default_rng(7)
    X = gen.standard_normal((120, 4))
    y = X[:, 0] + 0.3 * gen.standard_normal(120)
    return Dataset(X, ("x1", "x2", "x3", "x4"), y)
