"""
Seeded sampling from source measures.

Every replication owns one `SeededStream`: a numpy Generator driven by SFC64 and
seeded through SeedSequence(seed, spawn_key=(stream_id,)). Distinct stream ids
give independent SeedSequence children, and the (seed, stream_id) pair fixes the
whole sample sequence on every platform numpy supports.
"""
import logging
from typing import Sequence, Union

import numpy as np

from sdot.core.exceptions import SdotError
from sdot.schemas.measure import (
    DiscreteEmpirical,
    GaussianMixture,
    MaterializedSource,
    SampledSource,
    UniformHypercube,
)

logger = logging.getLogger(__name__)

RNG_ALGORITHM = "numpy SFC64 seeded by SeedSequence(seed, spawn_key=(stream_id,))"

# Solvers always draw in blocks of this size so a run's sample sequence does not depend on n_max.
SAMPLE_BLOCK = 4096


class SeededStream:
    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise SdotError("seed and stream id must be non-negative", {"seed": seed, "stream": stream_id})
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.SFC64(sequence))

    def __repr__(self) -> str:
        return f"SeededStream(seed={self.seed}, stream_id={self.stream_id})"


def _inverse_cdf(weights: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    return np.minimum(np.searchsorted(cdf, uniforms, side="right"), weights.size - 1)


def sample_indices(source: DiscreteEmpirical, stream: SeededStream, size: int) -> np.ndarray:
    return _inverse_cdf(source.weights, stream.generator.random(size))


def sample_block(source: MaterializedSource, stream: SeededStream, size: int) -> np.ndarray:
    """
    Draw `size` i.i.d. points.

    Args:
        source (MaterializedSource): Discrete, Gaussian mixture or uniform hypercube source.
        stream (SeededStream): Stream owned by the caller.
        size (int): Number of draws.

    Returns:
        np.ndarray: Points of shape (size, d).
    """
    generator = stream.generator
    if isinstance(source, DiscreteEmpirical):
        return source.points[sample_indices(source, stream, size)]
    if isinstance(source, GaussianMixture):
        components = _inverse_cdf(source.weights, generator.random(size))
        noise = generator.standard_normal((size, source.dim))
        return source.means[components] + source.stds[components, None] * noise
    if isinstance(source, UniformHypercube):
        return generator.random((size, source.dim))
    raise SdotError(f"cannot sample from source of kind {getattr(source, 'kind', type(source).__name__)!r}")


def sample(source: MaterializedSource, stream: SeededStream) -> np.ndarray:
    return sample_block(source, stream, 1)[0]


def empirical_of_samples(samples: Union[np.ndarray, Sequence[Sequence[float]]]) -> DiscreteEmpirical:
    """Uniform discrete measure on the samples; repeated points stay distinct atoms."""
    points = np.asarray(samples, dtype=float)
    if points.size == 0 or len(points) == 0:
        raise SdotError("cannot build an empirical measure from an empty sample")
    if points.ndim == 1:
        points = points[:, None]
    return DiscreteEmpirical(points=points, weights=np.full(len(points), 1.0 / len(points)))


def materialize(source: Union[MaterializedSource, SampledSource]) -> MaterializedSource:
    if isinstance(source, SampledSource):
        logger.debug("Drawing %d points from %s (seed %d)", source.size, source.base.kind, source.seed)
        return empirical_of_samples(sample_block(source.base, SeededStream(source.seed, 0), source.size))
    return source


def is_discrete(source: MaterializedSource) -> bool:
    return isinstance(source, DiscreteEmpirical)
