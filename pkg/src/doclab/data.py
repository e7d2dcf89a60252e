"""Datasets: the synthetic two-Gaussian problem and binary MNIST subsets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sphere import RngStream


@dataclass(frozen=True)
class LabeledDataset:
    inputs: np.ndarray
    labels: np.ndarray
    provenance: str = "crafted"
    name: str = field(default="", compare=False)

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int8)
        if inputs.ndim != 2:
            raise ValueError(f"inputs must be 2-D (n, D), got shape {inputs.shape}")
        if labels.shape != (inputs.shape[0],):
            raise ValueError(f"{inputs.shape[0]} inputs but labels of shape {labels.shape}")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        if self.provenance not in ("synthetic-gaussian", "mnist-subset", "crafted"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        inputs.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.inputs[idx], self.labels[idx], self.provenance, self.name)

    def single_class(self) -> bool:
        """True when at most one label value occurs (constant classifiers can fit)."""
        return len(np.unique(self.labels)) <= 1


@dataclass(frozen=True)
class GaussianProblem:
    """Two isotropic Gaussians centred at (+offset, 0, ...) (label 0) and (-offset, 0, ...) (label 1)."""

    dim: int = 10
    center_offset: float = 1.0
    class_std: float = 0.5

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.class_std <= 0:
            raise ValueError("class_std must be positive")

    @property
    def e_min(self) -> float:
        return bayes_error_gaussian(self)

    def means(self) -> np.ndarray:
        mu = np.zeros((2, self.dim))
        mu[0, 0], mu[1, 0] = self.center_offset, -self.center_offset
        return mu


def bayes_error_gaussian(problem: GaussianProblem) -> float:
    """Bayes error Phi(-offset/std); the optimal boundary is the plane x_1 = 0."""
    z = abs(problem.center_offset) / problem.class_std
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _gaussian_inputs(problem: GaussianProblem, labels: np.ndarray, rng: RngStream) -> np.ndarray:
    x = rng.gen.normal(scale=problem.class_std, size=(labels.size, problem.dim))
    x[:, 0] += np.where(labels == 0, problem.center_offset, -problem.center_offset)
    return x


def gen_gaussian(problem: GaussianProblem, n: int, rng: RngStream) -> LabeledDataset:
    """``n`` i.i.d. samples; each label is a fair coin flip, so one-class sets can occur."""
    if n < 0:
        raise ValueError("n must be >= 0")
    labels = rng.gen.integers(0, 2, size=n)
    return LabeledDataset(_gaussian_inputs(problem, labels, rng), labels, "synthetic-gaussian")


def gen_gaussian_balanced(problem: GaussianProblem, n: int, rng: RngStream) -> LabeledDataset:
    """Balanced sample (ceil(n/2) of label 0, floor(n/2) of label 1), order shuffled."""
    labels = np.zeros(n, dtype=np.int64)
    labels[(n + 1) // 2:] = 1
    rng.gen.shuffle(labels)
    return LabeledDataset(_gaussian_inputs(problem, labels, rng), labels, "synthetic-gaussian")


def with_random_labels(data: LabeledDataset, rng: RngStream) -> LabeledDataset:
    """Replace every label by an independent fair coin flip."""
    labels = rng.gen.integers(0, 2, size=len(data))
    return LabeledDataset(data.inputs, labels, data.provenance, data.name)


class InsufficientSamplesError(ValueError):
    pass


def filter_binary(images: np.ndarray, labels: np.ndarray, class_a: int, class_b: int,
                  per_class_cap: int) -> LabeledDataset:
    """Keep two digits, relabel ``class_a -> 0`` and ``class_b -> 1``, first ``per_class_cap`` of each."""
    if per_class_cap < 0:
        raise ValueError("per_class_cap must be >= 0")
    keep = []
    for digit in (class_a, class_b):
        idx = np.flatnonzero(labels == digit)
        if idx.size < per_class_cap:
            raise InsufficientSamplesError(
                f"digit {digit}: need {per_class_cap} samples, only {idx.size} available "
                f"(short by {per_class_cap - idx.size})")
        keep.append(idx[:per_class_cap])
    idx = np.sort(np.concatenate(keep))
    binary = (labels[idx] == class_b).astype(np.int8)
    return LabeledDataset(images[idx].reshape(idx.size, int(np.prod(images.shape[1:]))), binary, "mnist-subset",
                          f"mnist-{class_a}v{class_b}")


def draw_training_set(pool: LabeledDataset, n: int, rng: RngStream) -> LabeledDataset:
    """``n`` samples drawn uniformly without replacement from ``pool``."""
    if not 0 <= n <= len(pool):
        raise ValueError(f"cannot draw {n} samples from a pool of {len(pool)}")
    return pool.subset(rng.gen.choice(len(pool), size=n, replace=False))


@dataclass(frozen=True)
class GaussianSource:
    """Training-set factory for the synthetic problem (picklable for worker pools)."""

    problem: GaussianProblem

    def __call__(self, n: int, rng: RngStream) -> LabeledDataset:
        return gen_gaussian(self.problem, n, rng)


@dataclass(frozen=True)
class PoolSource:
    """Training-set factory drawing subsets of a fixed pool."""

    pool: LabeledDataset

    def __call__(self, n: int, rng: RngStream) -> LabeledDataset:
        return draw_training_set(self.pool, n, rng)


@dataclass(frozen=True)
class RandomLabelSource:
    """Wraps a source and replaces its labels by fair coin flips."""

    base: object

    def __call__(self, n: int, rng: RngStream) -> LabeledDataset:
        return with_random_labels(self.base(n, rng), rng)
