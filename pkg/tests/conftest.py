import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make `oracles` importable

from diffpaint import GaussianMixturePrior, build_linear_schedule


@pytest.fixture(scope="session")
def sched50():
    return build_linear_schedule(50)


@pytest.fixture(scope="session")
def std1d_prior():
    return GaussianMixturePrior.single([0.0], [[1.0]])


@pytest.fixture(scope="session")
def corr2d_prior():
    return GaussianMixturePrior.single([0.0, 0.0], [[1.0, 0.8], [0.8, 1.0]])
