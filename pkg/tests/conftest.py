import math

import numpy as np
import pytest

from blockattack import analysis as an

# Closed-form values of the two-pixel logistic instance, f = log(1 + exp(s)),
# s = x1 + x2 with each pixel at +/-1.
F_EMPTY = math.log1p(math.exp(-2.0))
F_ONE = math.log(2.0)
F_BOTH = math.log1p(math.exp(2.0))


@pytest.fixture
def counterexample():
    return an.logistic_counterexample()


@pytest.fixture
def mod3():
    return an.modular([3.0, -1.0, 2.0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
