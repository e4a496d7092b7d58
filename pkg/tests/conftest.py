import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from icin import CategoricalSpace, ObservedDistribution  # noqa: E402


@pytest.fixture
def p2_space():
    return CategoricalSpace((2, 2))


@pytest.fixture
def p2_table(p2_space):
    """Two binary items, all four patterns; the worked example used throughout."""
    return ObservedDistribution(
        p2_space,
        {
            "00": [[0.20, 0.10], [0.10, 0.20]],
            "01": [0.10, 0.10],
            "10": [0.05, 0.05],
            "11": 0.10,
        },
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
