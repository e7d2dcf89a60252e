"""Reproducible, stream-splittable sampling on the unit hypersphere.

Every random quantity in an experiment comes from a stream keyed by
``(seed, stream_id, *subkeys)``. Streams are Philox counter-based generators
seeded through ``numpy.random.SeedSequence`` spawn keys, so any two distinct
keys give independent sequences and the same key always reproduces the same
draws, no matter which worker process creates it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GENERATOR_NAME = "numpy.Philox4x64-10+SeedSequence"

# purpose tags used as the first spawn-key component
DOC_STREAM = 1
TRAIN_STREAM = 2
WEIGHT_STREAM = 3
TEST_STREAM = 4
PROBE_STREAM = 5
BOOTSTRAP_STREAM = 6


@dataclass
class RngStream:
    seed: int
    stream_id: tuple[int, ...]
    gen: np.random.Generator = field(repr=False)


def derive_stream(seed: int, stream_id: int, *subkeys: int) -> RngStream:
    """Independent, reproducible stream for the logical task ``stream_id``.

    Stream ids must come from logical trial indices, never from worker
    indices, so results do not depend on how work is scheduled.
    """
    key = (int(stream_id), *(int(k) for k in subkeys))
    ss = np.random.SeedSequence(int(seed), spawn_key=key)
    return RngStream(int(seed), key, np.random.Generator(np.random.Philox(ss)))


def derive_seed(seed: int, stream_id: int, *subkeys: int) -> int:
    """A 63-bit integer seed derived from a stream key (for logging and re-seeding)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id), *(int(k) for k in subkeys)))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def sample_unit_sphere_batch(count: int, dim: int, rng: RngStream) -> np.ndarray:
    """``count`` points uniform on S^{dim-1}, shape ``(count, dim)``.

    Normalised Gaussian vectors; rows with zero norm (probability zero) are
    redrawn.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    v = rng.gen.standard_normal((count, dim))
    norms = np.linalg.norm(v, axis=1)
    bad = norms == 0.0
    while np.any(bad):
        v[bad] = rng.gen.standard_normal((int(bad.sum()), dim))
        norms[bad] = np.linalg.norm(v[bad], axis=1)
        bad = norms == 0.0
    v /= norms[:, None]
    return v


def sample_unit_sphere(dim: int, rng: RngStream) -> np.ndarray:
    return sample_unit_sphere_batch(1, dim, rng)[0]
