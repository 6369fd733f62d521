import numpy as np
import pytest
from hypothesis import settings

from sfwzoo.objective import Dataset, LogisticObjective, toy_datasets

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(params=range(3), ids=["toy4x3", "toy7x6", "toy10x5"])
def toy(request):
    return toy_datasets()[request.param]


@pytest.fixture
def small_problem():
    """A 12-sample, 4-feature dense problem with a non-trivial optimum."""
    rng = np.random.default_rng(99)
    X = rng.standard_normal((12, 4))
    y = np.where(rng.random(12) < 0.5, -1.0, 1.0)
    ds = Dataset.from_dense(X, y)
    return ds, LogisticObjective(ds)
