"""Rejection sampling of zero-training-error solutions and volume probes.

A weight drawn uniformly from the sphere fits a random training set of size n
with probability (1 - E(w))**n, so repeatedly drawing until the training
error is zero samples the set of global minima uniformly. Each trial owns two
RNG streams keyed by (n, trial_id): one for its training set, one for its
weight draws.
"""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np

from ._pool import parallel_map
from .data import LabeledDataset
from .nn import Arch, empirical_error, mistake_counts, weight_count
from .sphere import (BOOTSTRAP_STREAM, PROBE_STREAM, TRAIN_STREAM, WEIGHT_STREAM, RngStream,
                     derive_seed, derive_stream, sample_unit_sphere_batch)

DEFAULT_MAX_TRIALS = 10_000_000
# weight draws per rejection batch grow geometrically up to this size
_MAX_BATCH = 4096
_TRAIN_CHUNK = 8


@dataclass
class Solution:
    weights: np.ndarray
    trials_to_hit: int


@dataclass
class Exhausted:
    max_trials: int


def _batch_sizes(dim: int):
    cap = max(16, min(_MAX_BATCH, (1 << 24) // (8 * dim)))
    size = 16
    while True:
        yield size
        size = min(2 * size, cap)


def _fits(arch: Arch, w: np.ndarray, train: LabeledDataset) -> np.ndarray:
    """Boolean mask of rows of ``w`` with zero training error.

    Training points are checked a few at a time and failing weights dropped
    early; the mask equals ``mistake_counts(...) == 0``.
    """
    alive = np.arange(w.shape[0])
    for s0 in range(0, len(train), _TRAIN_CHUNK):
        if alive.size == 0:
            break
        wrong = mistake_counts(arch, w[alive], train.inputs[s0:s0 + _TRAIN_CHUNK],
                               train.labels[s0:s0 + _TRAIN_CHUNK])
        alive = alive[wrong == 0]
    mask = np.zeros(w.shape[0], dtype=bool)
    mask[alive] = True
    return mask


def find_zero_train_solution(arch: Arch, train: LabeledDataset, rng: RngStream,
                             max_trials: int = DEFAULT_MAX_TRIALS) -> Solution | Exhausted:
    """Draw sphere points until one classifies ``train`` perfectly.

    The hit and its 1-based draw index do not depend on the batch schedule:
    draws are consumed from ``rng`` in order and the first fitting one wins.
    """
    if max_trials < 1:
        raise ValueError("max_trials must be >= 1")
    dim = weight_count(arch)
    used = 0
    for size in _batch_sizes(dim):
        size = min(size, max_trials - used)
        if size <= 0:
            return Exhausted(max_trials)
        w = sample_unit_sphere_batch(size, dim, rng)
        hits = np.flatnonzero(_fits(arch, w, train)) if len(train) else np.array([0])
        if hits.size:
            return Solution(w[hits[0]], used + int(hits[0]) + 1)
        used += size


@dataclass
class TrialRecord:
    trial_id: int
    n: int
    train_seed: int
    trials_to_hit: int
    test_error: float | None  # None when the draw budget ran out
    wall_time_ms: float | None = None
    single_class: bool = False

    @property
    def found(self) -> bool:
        return self.test_error is not None


def _run_trial(trial_id: int, *, arch: Arch, source: Callable, test: LabeledDataset, n: int,
               max_trials: int, seed: int, record_time: bool) -> TrialRecord:
    t0 = time.perf_counter()
    train_seed = derive_seed(seed, TRAIN_STREAM, n, trial_id)
    train = source(n, derive_stream(train_seed, 0))
    res = find_zero_train_solution(arch, train, derive_stream(seed, WEIGHT_STREAM, n, trial_id), max_trials)
    if isinstance(res, Exhausted):
        hit, err = res.max_trials, None
    else:
        hit, err = res.trials_to_hit, empirical_error(arch, res.weights, test)
    wall = (time.perf_counter() - t0) * 1e3 if record_time else None
    return TrialRecord(trial_id, n, train_seed, hit, err, wall, train.single_class())


def sample_qn(arch: Arch, source: Callable[[int, RngStream], LabeledDataset], test: LabeledDataset,
              n: int, trials: int, max_trials_each: int = DEFAULT_MAX_TRIALS, seed: int = 0, *,
              workers: int = 1, record_time: bool = False) -> list[TrialRecord]:
    """One zero-training-error solution per fresh training set, ``trials`` times.

    Exhausted trials are kept in the output with ``test_error=None``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    job = partial(_run_trial, arch=arch, source=source, test=test, n=n,
                  max_trials=max_trials_each, seed=seed, record_time=record_time)
    return sorted(parallel_map(job, range(trials), workers), key=lambda r: r.trial_id)


def bootstrap_sigma(values, stat=np.mean, resamples: int = 1000, seed: int = 0, key: int = 0) -> float:
    """Bootstrap standard deviation of ``stat`` over resamples of ``values``."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return 0.0
    rng = derive_stream(seed, BOOTSTRAP_STREAM, 1, key)
    idx = rng.gen.integers(0, values.size, size=(resamples, values.size))
    return float(np.std([stat(values[i]) for i in idx], ddof=1))


class EmptyBatchError(ValueError):
    pass


@dataclass
class QnSummary:
    n: int
    count: int
    exhausted: int
    single_class: int
    mean: float
    q1: float
    median: float
    q3: float
    min: float
    max: float
    phi_hat: dict[float, float]
    mean_sigma: float = 0.0


def summarize_qn(records: list[TrialRecord], e_min: float = 0.0, epsilons=(), *,
                 bootstrap: int = 1000, seed: int = 0) -> QnSummary:
    """Box-plot statistics and bad fractions of the test errors in one batch.

    ``phi_hat[eps]`` is the share of solutions with test error >= e_min + eps;
    ``mean_sigma`` is the bootstrap standard deviation of the mean.
    """
    errs = np.array([r.test_error for r in records if r.found], dtype=np.float64)
    if errs.size == 0:
        raise EmptyBatchError("no trial found a zero-training-error solution")
    q1, med, q3 = np.quantile(errs, [0.25, 0.5, 0.75])
    n = records[0].n
    phi = {float(e): float(np.mean(errs >= e_min + e)) for e in epsilons}
    return QnSummary(n, int(errs.size), sum(not r.found for r in records),
                     sum(r.single_class for r in records), float(errs.mean()), float(q1), float(med),
                     float(q3), float(errs.min()), float(errs.max()), phi,
                     bootstrap_sigma(errs, resamples=bootstrap, seed=seed, key=n) if bootstrap else 0.0)


TRIAL_COLUMNS = ("trial_id", "n", "train_seed", "trials_to_hit", "test_error", "wall_time_ms", "single_class")


def _f(x) -> str:
    return "" if x is None else repr(float(x))


def trials_to_csv(records: list[TrialRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIAL_COLUMNS)
    for r in records:
        w.writerow([r.trial_id, r.n, r.train_seed, r.trials_to_hit, _f(r.test_error),
                    _f(r.wall_time_ms), int(r.single_class)])
    return buf.getvalue()


def trials_from_csv(text: str) -> list[TrialRecord]:
    out = []
    for r in csv.DictReader(io.StringIO(text)):
        out.append(TrialRecord(int(r["trial_id"]), int(r["n"]), int(r["train_seed"]),
                               int(r["trials_to_hit"]),
                               float(r["test_error"]) if r["test_error"] else None,
                               float(r["wall_time_ms"]) if r["wall_time_ms"] else None,
                               bool(int(r.get("single_class") or 0))))
    return out


@dataclass
class VolumePair:
    train_seed: int
    n: int
    omega_hat: float
    omega_eps_hat: float
    probes: int
    epsilon: float

    @property
    def phi_hat(self) -> float | None:
        return self.omega_eps_hat / self.omega_hat if self.omega_hat > 0 else None


def _probe_test_errors(arch: Arch, train: LabeledDataset, test: LabeledDataset, probes: int,
                       rng: RngStream) -> np.ndarray:
    """Test errors of the probes that fit ``train``; probes that do not are skipped."""
    dim = weight_count(arch)
    batch = max(256, min(16384, (1 << 24) // (8 * dim)))
    errs = []
    for b0 in range(0, probes, batch):
        w = sample_unit_sphere_batch(min(batch, probes - b0), dim, rng)
        if len(train):
            w = w[_fits(arch, w, train)]
        if w.shape[0]:
            errs.append(mistake_counts(arch, w, test.inputs, test.labels) / len(test))
    return np.concatenate(errs) if errs else np.empty(0)


def estimate_volume_pairs(arch: Arch, train: LabeledDataset, test: LabeledDataset, probes: int,
                          epsilons, e_min: float, rng: RngStream, train_seed: int = 0) -> list[VolumePair]:
    """Monte-Carlo estimates of the solution volume and bad-solution volume, one pair per epsilon."""
    if probes < 1:
        raise ValueError("probes must be >= 1")
    errs = _probe_test_errors(arch, train, test, probes, rng)
    omega = errs.size / probes
    return [VolumePair(train_seed, len(train), omega, float(np.count_nonzero(errs >= e_min + e)) / probes,
                       probes, float(e)) for e in epsilons]


def estimate_volume_pair(arch: Arch, train: LabeledDataset, test: LabeledDataset, probes: int,
                         epsilon: float, e_min: float, rng: RngStream) -> VolumePair:
    return estimate_volume_pairs(arch, train, test, probes, [epsilon], e_min, rng)[0]


def _volume_job(set_id: int, *, arch, source, test, n, probes, epsilons, e_min, seed):
    train_seed = derive_seed(seed, TRAIN_STREAM, n, set_id, 1)
    train = source(n, derive_stream(train_seed, 0))
    return estimate_volume_pairs(arch, train, test, probes, epsilons, e_min,
                                 derive_stream(seed, PROBE_STREAM, n, set_id), train_seed)


def sample_volume_pairs(arch: Arch, source, test: LabeledDataset, n: int, training_sets: int, probes: int,
                        epsilons, e_min: float, seed: int = 0, *, workers: int = 1) -> list[VolumePair]:
    """Volume pairs over ``training_sets`` independent training sets of size ``n``."""
    job = partial(_volume_job, arch=arch, source=source, test=test, n=n, probes=probes,
                  epsilons=list(epsilons), e_min=e_min, seed=seed)
    return [p for group in parallel_map(job, range(training_sets), workers) for p in group]


VOLUME_COLUMNS = ("train_seed", "n", "probes", "omega_hat", "omega_eps_hat", "epsilon")


def volumes_to_csv(pairs: list[VolumePair]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(VOLUME_COLUMNS)
    for p in pairs:
        w.writerow([p.train_seed, p.n, p.probes, repr(p.omega_hat), repr(p.omega_eps_hat), repr(p.epsilon)])
    return buf.getvalue()


def volumes_from_csv(text: str) -> list[VolumePair]:
    return [VolumePair(int(r["train_seed"]), int(r["n"]), float(r["omega_hat"]), float(r["omega_eps_hat"]),
                       int(r["probes"]), float(r["epsilon"])) for r in csv.DictReader(io.StringIO(text))]


class InsufficientDataError(ValueError):
    pass


@dataclass
class CorrelationDiagnostic:
    pairs_used: int
    covariance: float
    covariance_ci: tuple[float, float]
    ratio_of_means: float
    mean_of_ratios: float
    difference_sigma: float

    @property
    def inequality_holds(self) -> bool:
        """mean of ratios <= ratio of means, allowing two bootstrap sigmas."""
        return self.mean_of_ratios <= self.ratio_of_means + 2.0 * self.difference_sigma


def _corr_stats(omega: np.ndarray, omega_eps: np.ndarray) -> tuple[float, float, float]:
    phi = omega_eps / omega
    cov = float(np.cov(phi, omega, ddof=1)[0, 1]) if phi.size > 1 else 0.0
    return cov, float(omega_eps.sum() / omega.sum()), float(phi.mean())


def correlation_diagnostic(pairs: list[VolumePair], bootstrap: int = 1000, seed: int = 0) -> CorrelationDiagnostic:
    """Compare the mean bad fraction with the ratio of mean volumes across training sets.

    A non-negative covariance between bad fraction and solution volume makes
    the mean of ratios no larger than the ratio of means, with equality when
    the two are uncorrelated.
    """
    usable = [p for p in pairs if p.omega_hat > 0]
    if len(usable) < 2:
        raise InsufficientDataError(f"need >= 2 pairs with omega_hat > 0, got {len(usable)}")
    omega = np.array([p.omega_hat for p in usable])
    omega_eps = np.array([p.omega_eps_hat for p in usable])
    cov, rom, mor = _corr_stats(omega, omega_eps)
    rng = derive_stream(seed, BOOTSTRAP_STREAM, 2, len(usable))
    covs, diffs = [], []
    for _ in range(bootstrap):
        i = rng.gen.integers(0, omega.size, omega.size)
        c, r, m = _corr_stats(omega[i], omega_eps[i])
        covs.append(c)
        diffs.append(m - r)
    ci = (float(np.quantile(covs, 0.025)), float(np.quantile(covs, 0.975))) if bootstrap else (cov, cov)
    sigma = float(np.std(diffs, ddof=1)) if bootstrap > 1 else 0.0
    return CorrelationDiagnostic(len(usable), cov, ci, rom, mor, sigma)
