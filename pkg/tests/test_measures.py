import numpy as np
import pytest
from pydantic import ValidationError

from sdot.core.exceptions import SdotError
from sdot.schemas.measure import (
    DiscreteEmpirical,
    GaussianMixture,
    SampledSource,
    TargetMeasure,
    UniformHypercube,
)
from sdot.services.measures import (
    SeededStream,
    empirical_of_samples,
    materialize,
    sample,
    sample_block,
    sample_indices,
)


class TestMeasureValidation:
    def test_uniform_default_weights(self):
        target = TargetMeasure(points=[[0.0], [1.0], [2.0], [3.0]])
        np.testing.assert_allclose(target.weights, 0.25)
        assert target.is_uniform

    def test_flat_points_are_one_dimensional(self):
        target = TargetMeasure(points=[0.0, 1.0])
        assert target.dim == 1
        assert target.size == 2

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            TargetMeasure(points=[[0.0], [1.0]], weights=[0.5, 0.6])

    def test_weights_must_be_positive(self):
        with pytest.raises(ValidationError):
            TargetMeasure(points=[[0.0], [1.0]], weights=[1.0, 0.0])

    def test_points_match_weights(self):
        with pytest.raises(ValidationError):
            DiscreteEmpirical(points=[[0.0], [1.0]], weights=[1.0])

    def test_arrays_are_read_only(self):
        target = TargetMeasure(points=[[0.0], [1.0]])
        with pytest.raises(ValueError):
            target.weights[0] = 1.0

    def test_mixture_stds_positive(self):
        with pytest.raises(ValidationError):
            GaussianMixture(weights=[1.0], means=[[0.0, 0.0]], stds=[0.0])


class TestSeededStream:
    def test_same_seed_same_sequence(self):
        source = UniformHypercube(dim=2)
        first = sample_block(source, SeededStream(123, 4), 100)
        second = sample_block(source, SeededStream(123, 4), 100)
        np.testing.assert_array_equal(first, second)

    def test_streams_differ(self):
        source = UniformHypercube(dim=2)
        first = sample_block(source, SeededStream(123, 0), 10)
        second = sample_block(source, SeededStream(123, 1), 10)
        assert not np.array_equal(first, second)

    def test_negative_seed_rejected(self):
        with pytest.raises(SdotError):
            SeededStream(-1)


class TestSampling:
    def test_single_atom_always_returned(self):
        source = DiscreteEmpirical(points=[[0.5, -2.0]])
        draws = sample_block(source, SeededStream(0), 50)
        np.testing.assert_array_equal(draws, np.tile([0.5, -2.0], (50, 1)))

    def test_discrete_frequencies(self):
        source = DiscreteEmpirical(points=[[0.0], [1.0]], weights=[0.3, 0.7])
        indices = sample_indices(source, SeededStream(42), 100000)
        assert np.mean(indices == 1) == pytest.approx(0.7, abs=0.01)

    def test_hypercube_support(self):
        draws = sample_block(UniformHypercube(dim=3), SeededStream(7), 1000)
        assert draws.shape == (1000, 3)
        assert np.all((draws >= 0.0) & (draws <= 1.0))

    def test_mixture_moments(self):
        source = GaussianMixture(weights=[0.5, 0.5], means=[[-1.0], [1.0]], stds=[0.1, 0.1])
        draws = sample_block(source, SeededStream(3), 20000)[:, 0]
        assert draws.mean() == pytest.approx(0.0, abs=0.03)
        assert np.mean(np.abs(draws) > 0.5) > 0.99

    def test_single_sample_shape(self):
        assert sample(UniformHypercube(dim=4), SeededStream(0)).shape == (4,)


class TestEmpirical:
    def test_one_sample(self):
        measure = empirical_of_samples([[1.0, 2.0]])
        np.testing.assert_array_equal(measure.weights, [1.0])

    def test_uniform_weights(self):
        measure = empirical_of_samples(np.random.default_rng(42).random((7, 2)))
        np.testing.assert_allclose(measure.weights, 1.0 / 7.0)
        assert abs(measure.weights.sum() - 1.0) <= 1e-12

    def test_duplicates_are_distinct_atoms(self):
        measure = empirical_of_samples([[0.0], [0.0], [1.0]])
        assert measure.size == 3
        np.testing.assert_allclose(measure.weights, 1.0 / 3.0)

    def test_empty_input_rejected(self):
        with pytest.raises(SdotError):
            empirical_of_samples(np.empty((0, 2)))

    def test_materialize_sampled_source(self):
        spec = SampledSource(base=UniformHypercube(dim=2), size=25, seed=9)
        first, second = materialize(spec), materialize(spec)
        assert isinstance(first, DiscreteEmpirical)
        assert first.size == 25
        np.testing.assert_array_equal(first.points, second.points)

    def test_materialize_keeps_discrete_source(self):
        source = DiscreteEmpirical(points=[[0.0]])
        assert materialize(source) is source
