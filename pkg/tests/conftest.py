import numpy as np
import pytest

from sdot.schemas.measure import DiscreteEmpirical, TargetMeasure
from sdot.services.truth import ground_truth


def make_instance(sources: int, targets: int, dim: int = 2, seed: int = 0, weights=None):
    rng = np.random.default_rng(seed)
    source = DiscreteEmpirical(points=rng.random((sources, dim)))
    target = TargetMeasure(points=rng.random((targets, dim)), weights=weights)
    return source, target


@pytest.fixture
def desk():
    """Small benign instance: cost spread well below eps = 1."""
    return make_instance(12, 4, seed=7)


@pytest.fixture
def desk_truth(desk):
    source, target = desk
    return ground_truth(source, target, 1.0)


@pytest.fixture
def skewed():
    """Non-uniform target weights."""
    weights = np.array([0.1, 0.2, 0.3, 0.4])
    return make_instance(15, 4, seed=11, weights=weights)
