"""Density of classifiers: the distribution of true error over the weight sphere.

The histogram is treated as a piecewise-constant density on [0, 1]. Masses are
normalised so the whole sphere has volume 1; the mass above ``e_min + eps`` is
the normalised bad-classifier volume and its complement the good fraction.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from ._pool import parallel_map
from .data import LabeledDataset
from .nn import Arch, mistake_counts, weight_count
from .sphere import DOC_STREAM, GENERATOR_NAME, derive_stream, sample_unit_sphere_batch

DOC_BLOCK = 1024
# slack for float round-off in range checks on epsilon
_EPS_TOL = 1e-12


@dataclass
class DocHistogram:
    counts: np.ndarray
    e_min_estimate: float
    e_min: float | None = None
    e_min_policy: str = "estimated"
    arch: tuple[int, ...] = ()
    dataset_id: str = ""
    seed: int = 0
    generator_name: str = GENERATOR_NAME
    e_max_estimate: float = field(default=1.0)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 1 or self.counts.size < 2:
            raise ValueError("a DOC histogram needs at least two bins")
        if (self.counts < 0).any():
            raise ValueError("bin counts must be non-negative")
        if self.e_min is None:
            self.e_min = float(self.e_min_estimate)
        if self.e_min_policy not in ("analytic", "estimated"):
            raise ValueError(f"unknown E_min policy {self.e_min_policy!r}")

    @property
    def bin_count(self) -> int:
        return self.counts.size

    @property
    def total_samples(self) -> int:
        return int(self.counts.sum())

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.bin_count + 1)

    @property
    def masses(self) -> np.ndarray:
        total = self.total_samples
        return self.counts / total if total else np.zeros(self.bin_count)

    def supports(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-bin support ``[lo, hi]`` of the piecewise-uniform density.

        Bin edges, except that the lowest non-empty bin starts at the observed
        minimum error, so nothing is placed below it.
        """
        edges = self.edges
        lo, hi = edges[:-1].copy(), edges[1:].copy()
        nz = np.flatnonzero(self.counts)
        if nz.size:
            first = nz[0]
            # equals hi only when every sample sits exactly at E = 1: a point mass
            lo[first] = min(max(lo[first], self.e_min_estimate), hi[first])
        return lo, hi

    def merge(self, other: "DocHistogram") -> "DocHistogram":
        if other.bin_count != self.bin_count:
            raise ValueError("cannot merge histograms with different bin counts")
        return DocHistogram(self.counts + other.counts,
                            min(self.e_min_estimate, other.e_min_estimate),
                            self.e_min, self.e_min_policy, self.arch, self.dataset_id,
                            self.seed, self.generator_name,
                            max(self.e_max_estimate, other.e_max_estimate))

    def to_dict(self) -> dict:
        return {
            "bin_count": self.bin_count,
            "total_samples": self.total_samples,
            "counts": self.counts.tolist(),
            "e_min_estimate": self.e_min_estimate,
            "e_max_estimate": self.e_max_estimate,
            "e_min": self.e_min,
            "e_min_policy": self.e_min_policy,
            "arch": list(self.arch),
            "dataset_id": self.dataset_id,
            "seed": self.seed,
            "generator_name": self.generator_name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DocHistogram":
        counts = np.asarray(d["counts"], dtype=np.int64)
        if counts.size != d["bin_count"] or counts.sum() != d["total_samples"]:
            raise ValueError("DOC record is inconsistent: counts do not match bin_count/total_samples")
        return cls(counts, d["e_min_estimate"], d.get("e_min"), d.get("e_min_policy", "estimated"),
                   tuple(d.get("arch", ())), d.get("dataset_id", ""), d.get("seed", 0),
                   d.get("generator_name", GENERATOR_NAME), d.get("e_max_estimate", 1.0))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_left", "bin_right", "count", "normalized_mass"])
        edges = self.edges
        for i, (c, m) in enumerate(zip(self.counts, self.masses)):
            w.writerow([repr(float(edges[i])), repr(float(edges[i + 1])), int(c), repr(float(m))])
        return buf.getvalue()

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "DocHistogram":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _doc_block(block: int, *, arch: Arch, test_set: LabeledDataset, samples: int, seed: int,
               bins: int) -> tuple[np.ndarray, int, int]:
    count = min(DOC_BLOCK, samples - block * DOC_BLOCK)
    rng = derive_stream(seed, DOC_STREAM, block)
    w = sample_unit_sphere_batch(count, weight_count(arch), rng)
    wrong = mistake_counts(arch, w, test_set.inputs, test_set.labels)
    m = len(test_set)
    # integer binning avoids float edge artefacts when errors are exact multiples of 1/bins
    idx = np.minimum(wrong * bins // m, bins - 1)
    return np.bincount(idx, minlength=bins), int(wrong.min()), int(wrong.max())


def estimate_doc(arch: Arch, test_set: LabeledDataset, samples: int, bins: int = 100, seed: int = 0,
                 *, e_min: float | None = None, workers: int = 1, dataset_id: str = "") -> DocHistogram:
    """Histogram of test error over ``samples`` uniform draws from the weight sphere.

    Draws are grouped into fixed blocks of ``DOC_BLOCK`` with one RNG stream per
    block, so the histogram is identical for any worker count. Pass ``e_min``
    to fix an analytic E_min; otherwise the observed minimum is used.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if len(test_set) == 0:
        raise ValueError("test set is empty")
    nblocks = -(-samples // DOC_BLOCK)
    job = partial(_doc_block, arch=arch, test_set=test_set, samples=samples, seed=seed, bins=bins)
    parts = parallel_map(job, range(nblocks), workers)
    counts = sum(p[0] for p in parts)
    m = len(test_set)
    lo = min(p[1] for p in parts) / m
    hi = max(p[2] for p in parts) / m
    return DocHistogram(counts, lo, e_min if e_min is not None else lo,
                        "analytic" if e_min is not None else "estimated",
                        arch.layer_widths, dataset_id or test_set.name, seed, GENERATOR_NAME, hi)


def _check_eps(doc: DocHistogram, epsilon: float) -> None:
    if not -_EPS_TOL <= epsilon <= 1.0 - doc.e_min + _EPS_TOL:
        raise ValueError(f"epsilon={epsilon} outside [0, 1 - E_min] = [0, {1.0 - doc.e_min}]")


def mass_below(doc: DocHistogram, threshold: float) -> float:
    """Normalised mass with E < threshold, splitting the threshold bin linearly."""
    lo, hi = doc.supports()
    width = hi - lo
    point = width == 0
    frac = np.where(point, (lo < threshold).astype(float),
                    np.clip((threshold - lo) / np.where(point, 1.0, width), 0.0, 1.0))
    return float(np.sum(doc.masses * frac))


def g_epsilon(doc: DocHistogram, epsilon: float) -> float:
    """Fraction of the sphere with true error below ``E_min + epsilon``."""
    _check_eps(doc, epsilon)
    return min(1.0, mass_below(doc, doc.e_min + epsilon))


def omega_epsilon(doc: DocHistogram, epsilon: float) -> float:
    """Normalised volume of bad classifiers, ``1 - g_epsilon``."""
    return 1.0 - g_epsilon(doc, epsilon)
