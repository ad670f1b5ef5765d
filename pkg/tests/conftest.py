import sys
from pathlib import Path

import hypothesis
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

hypothesis.settings.register_profile(
    "default", deadline=None, max_examples=50
)
hypothesis.settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_symmetric(rng, p, scale=1.0):
    X = rng.normal(scale=scale, size=(p, p))
    return (X + X.T) / 2.0


@pytest.fixture
def two_group_theta():
    """p=4 two-group construction: within weight 1, across weight 0."""
    theta = np.zeros((4, 4))
    theta[0, 1] = theta[1, 0] = 1.0
    theta[2, 3] = theta[3, 2] = 1.0
    return theta
