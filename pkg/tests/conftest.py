import numpy as np
import pytest

from satpipe import patchio


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


@pytest.fixture
def random_patch(rng):
    return rng.integers(0, 256, size=(4, 28, 28), dtype=np.uint8)


@pytest.fixture
def small_dataset():
    spec = patchio.default_demo_spec(4, 25)
    return patchio.generate_synthetic(spec, 123)
