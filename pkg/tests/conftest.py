import numpy as np
import pytest

from gluedanneal.column_model import DEFAULT_ALPHA

ALPHA = DEFAULT_ALPHA


@pytest.fixture
def alpha():
    return ALPHA


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
