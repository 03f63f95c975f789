from typing import Annotated, Any, Literal, Union

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer, model_validator

SIMPLEX_TOL = 1e-12


def _as_float_array(value: Any) -> np.ndarray:
    array = np.array(value, dtype=float)
    array.setflags(write=False)
    return array


def _as_point_array(value: Any) -> np.ndarray:
    array = np.array(value, dtype=float)
    if array.ndim == 1:
        # a flat list is read as J points on the real line
        array = array[:, None]
    array.setflags(write=False)
    return array


_to_list = PlainSerializer(lambda array: array.tolist(), return_type=list, when_used="json")

FloatArray = Annotated[np.ndarray, BeforeValidator(_as_float_array), _to_list]
PointArray = Annotated[np.ndarray, BeforeValidator(_as_point_array), _to_list]


def _check_simplex(weights: np.ndarray, name: str) -> None:
    if weights.ndim != 1 or weights.size == 0:
        raise ValueError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
        raise ValueError(f"{name} must be finite and strictly positive")
    if abs(float(np.sum(weights)) - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"{name} must sum to 1 (got {float(np.sum(weights))!r})")


def _check_points(points: np.ndarray, count: int, name: str) -> None:
    if points.ndim != 2:
        raise ValueError(f"{name} must be a list of vectors")
    if points.shape[0] != count:
        raise ValueError(f"{name} has {points.shape[0]} rows, expected {count}")
    if not np.all(np.isfinite(points)):
        raise ValueError(f"{name} must be finite")


def _uniform_weights(data: Any, key: str = "points") -> Any:
    if isinstance(data, dict) and data.get("weights") is None and data.get(key) is not None:
        count = len(data[key])
        if count:
            data = {**data, "weights": np.full(count, 1.0 / count)}
    return data


class MeasureModel(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")


class TargetMeasure(MeasureModel):
    """Discrete target: J support points y_j in R^d with simplex weights nu."""

    points: PointArray
    weights: FloatArray

    @model_validator(mode="before")
    @classmethod
    def default_weights(cls, data: Any) -> Any:
        return _uniform_weights(data)

    @model_validator(mode="after")
    def validate_measure(self) -> "TargetMeasure":
        _check_simplex(self.weights, "target weights")
        _check_points(self.points, self.weights.size, "target points")
        return self

    @classmethod
    def uniform(cls, points: Any) -> "TargetMeasure":
        return cls(points=points)

    @property
    def size(self) -> int:
        return int(self.weights.size)

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def nu_min(self) -> float:
        return float(self.weights.min())

    @property
    def nu_max(self) -> float:
        return float(self.weights.max())

    @property
    def log_weights(self) -> np.ndarray:
        return np.log(self.weights)

    @property
    def is_uniform(self) -> bool:
        return self.nu_max - self.nu_min <= SIMPLEX_TOL * self.nu_max


class DiscreteEmpirical(MeasureModel):
    kind: Literal["discrete"] = "discrete"
    points: PointArray
    weights: FloatArray

    @model_validator(mode="before")
    @classmethod
    def default_weights(cls, data: Any) -> Any:
        return _uniform_weights(data)

    @model_validator(mode="after")
    def validate_measure(self) -> "DiscreteEmpirical":
        _check_simplex(self.weights, "source weights")
        _check_points(self.points, self.weights.size, "source points")
        return self

    @property
    def size(self) -> int:
        return int(self.weights.size)

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])


class GaussianMixture(MeasureModel):
    """Mixture of isotropic Gaussians N(means[k], stds[k]^2 I)."""

    kind: Literal["gaussian_mixture"] = "gaussian_mixture"
    weights: FloatArray
    means: PointArray
    stds: FloatArray

    @model_validator(mode="after")
    def validate_mixture(self) -> "GaussianMixture":
        _check_simplex(self.weights, "mixture weights")
        _check_points(self.means, self.weights.size, "mixture means")
        if self.stds.shape != self.weights.shape:
            raise ValueError("mixture stds must have one entry per component")
        if not np.all(np.isfinite(self.stds)) or np.any(self.stds <= 0):
            raise ValueError("mixture stds must be finite and strictly positive")
        return self

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])


class UniformHypercube(MeasureModel):
    kind: Literal["uniform_hypercube"] = "uniform_hypercube"
    dim: int = Field(ge=1)


ContinuousSource = Annotated[Union[GaussianMixture, UniformHypercube], Field(discriminator="kind")]


class SampledSource(MeasureModel):
    """Empirical measure of `size` seeded draws from a continuous law; resolved by `measures.materialize`."""

    kind: Literal["sampled"] = "sampled"
    base: ContinuousSource
    size: int = Field(ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)

    @property
    def dim(self) -> int:
        return self.base.dim


SourceMeasure = Annotated[
    Union[DiscreteEmpirical, GaussianMixture, UniformHypercube, SampledSource],
    Field(discriminator="kind"),
]

MaterializedSource = Union[DiscreteEmpirical, GaussianMixture, UniformHypercube]

