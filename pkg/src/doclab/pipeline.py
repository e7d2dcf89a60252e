"""Experiment orchestration: DOC -> zero-error solutions -> volumes -> bounds -> report.

Artifacts for one run live in ``<out_dir>/<name>/seed-<seed>/``:

    doc.json, doc.csv        DOC histogram
    trials.csv               one row per training set (all n)
    volumes.csv              volume probes (only with a [volumes] section)
    bounds.csv               bound curves over qn.n_values
    report.json              summary rebuilt from the files above only
    doc_hist.csv, doc.svg, boxplot.csv/.svg, comparison.csv/.svg
    stage.json               completed stages and the failing stage, if any
    timing.json              wall-clock seconds per stage (not reproducible)
"""
from __future__ import annotations

import json
import logging
import platform
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bounds import (DegenerateDocError, bound_curves, bound_curves_to_csv, bound_rows_from_csv,
                     corollary1_for_doc, mean_solution_volume, predicted_mean_error,
                     predicted_mean_error_sigma)
from .config import ExperimentConfig, GaussianSpec
from .data import (GaussianSource, LabeledDataset, PoolSource, RandomLabelSource, filter_binary,
                   gen_gaussian_balanced, with_random_labels)
from .doc import DocHistogram, estimate_doc, g_epsilon, omega_epsilon
from .harness import (EmptyBatchError, InsufficientDataError, bootstrap_sigma, correlation_diagnostic,
                      sample_qn, sample_volume_pairs, summarize_qn, trials_from_csv, trials_to_csv,
                      volumes_from_csv, volumes_to_csv)
from .idx import load_idx
from .plots import emit_plot_data
from .sphere import GENERATOR_NAME, TEST_STREAM, derive_stream

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
STAGES = ("doc", "qn", "volumes", "bounds", "report")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class Experiment:
    config: ExperimentConfig
    test: LabeledDataset
    source: object
    analytic_e_min: float | None
    dataset_id: str


def build_experiment(config: ExperimentConfig) -> Experiment:
    """Materialise the test set and training-set source, all derived from the config seed."""
    p = config.problem
    if isinstance(p, GaussianSpec):
        problem = p.problem
        test = gen_gaussian_balanced(problem, p.test_size, derive_stream(config.seed, TEST_STREAM))
        source, e_min = GaussianSource(problem), problem.e_min
        dataset_id = f"gaussian-d{p.dim}-off{p.center_offset:g}-std{p.class_std:g}-m{p.test_size}"
    else:
        a, b = p.digits
        train_x, train_y = load_idx(p.train_images, p.train_labels)
        test_x, test_y = load_idx(p.test_images, p.test_labels)
        pool = filter_binary(train_x, train_y, a, b, p.train_per_class)
        test = filter_binary(test_x, test_y, a, b, p.test_per_class)
        source, e_min = PoolSource(pool), None
        dataset_id = f"mnist-{a}v{b}-train{p.train_per_class}-test{p.test_per_class}"
    if p.random_labels:
        test = with_random_labels(test, derive_stream(config.seed, TEST_STREAM, 1))
        source, e_min = RandomLabelSource(source), 0.5
        dataset_id += "-random-labels"
    return Experiment(config, test, source, e_min, dataset_id)


def artifact_dir(config: ExperimentConfig, out_dir) -> Path:
    return Path(out_dir) / config.name / f"seed-{config.seed}"


def _write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _key(x: float) -> str:
    return repr(float(x))


def stage_doc(exp: Experiment, d: Path, workers: int) -> None:
    cfg = exp.config
    doc = estimate_doc(cfg.arch, exp.test, cfg.doc.samples, cfg.doc.bins, cfg.seed,
                       e_min=exp.analytic_e_min, workers=workers, dataset_id=exp.dataset_id)
    _write(d / "doc.json", doc.to_json())
    _write(d / "doc.csv", doc.to_csv())


def stage_qn(exp: Experiment, d: Path, workers: int) -> None:
    cfg = exp.config
    records = []
    for n in cfg.qn.n_values:
        log.info("qn: n=%d, %d training sets", n, cfg.qn.trials_per_n)
        records += sample_qn(cfg.arch, exp.source, exp.test, n, cfg.qn.trials_per_n, cfg.qn.max_trials_each,
                             cfg.seed, workers=workers, record_time=cfg.record_wall_time)
    _write(d / "trials.csv", trials_to_csv(records))


def stage_volumes(exp: Experiment, d: Path, workers: int) -> None:
    cfg = exp.config
    if cfg.volumes is None:
        return
    doc = DocHistogram.load(d / "doc.json")
    pairs = []
    for n in cfg.volumes.n_values:
        log.info("volumes: n=%d, %d training sets x %d probes", n, cfg.volumes.training_sets, cfg.volumes.probes)
        pairs += sample_volume_pairs(cfg.arch, exp.source, exp.test, n, cfg.volumes.training_sets,
                                     cfg.volumes.probes, cfg.volumes.epsilons, doc.e_min, cfg.seed,
                                     workers=workers)
    _write(d / "volumes.csv", volumes_to_csv(pairs))


def stage_bounds(exp: Experiment, d: Path, workers: int) -> None:
    cfg = exp.config
    doc = DocHistogram.load(d / "doc.json")
    eps = [e for e in cfg.bounds.epsilons if e <= 1 - doc.e_min]
    curves = bound_curves(doc, cfg.qn.n_values, eps, cfg.bounds.a_values, cfg.bounds.gammas)
    _write(d / "bounds.csv", bound_curves_to_csv(curves))


def build_report(config: ExperimentConfig, d: Path) -> dict:
    """Assemble report.json purely from the stored artifacts in ``d``."""
    doc = DocHistogram.load(d / "doc.json")
    records = trials_from_csv((d / "trials.csv").read_text())
    bound_rows = bound_rows_from_csv((d / "bounds.csv").read_text())
    eps_all = sorted(set(config.bounds.epsilons) | set(config.volumes.epsilons if config.volumes else []))
    eps_all = [e for e in eps_all if e <= 1 - doc.e_min]

    def bound(kind, n, **params):
        for r in bound_rows:
            if r["kind"] == kind and r["n"] == n and all(r[k] == v for k, v in params.items()):
                return r["value"]
        return None

    per_n = []
    for n in sorted({r.n for r in records}):
        batch = [r for r in records if r.n == n]
        row = {"n": n, "trials": len(batch), "exhausted": sum(not r.found for r in batch),
               "single_class": sum(r.single_class for r in batch),
               "mean_inverse_trials": float(np.mean([1.0 / r.trials_to_hit for r in batch if r.found]))
               if any(r.found for r in batch) else None,
               "first_draw_hit_rate": float(np.mean([r.found and r.trials_to_hit == 1 for r in batch])),
               "predicted_solution_volume": mean_solution_volume(doc, n)}
        try:
            s = summarize_qn(batch, doc.e_min, eps_all, seed=config.seed)
            row.update(count=s.count, mean=s.mean, mean_sigma=s.mean_sigma, q1=s.q1, median=s.median, q3=s.q3,
                       min=s.min, max=s.max, phi_hat={_key(e): v for e, v in s.phi_hat.items()})
        except EmptyBatchError:
            row.update(count=0, mean=None, mean_sigma=None, q1=None, median=None, q3=None, min=None, max=None,
                       phi_hat={})
        try:
            pred = predicted_mean_error(doc, n)
            pred_sigma = predicted_mean_error_sigma(doc, n, seed=config.seed)
        except DegenerateDocError:
            pred, pred_sigma = None, None
        row["predicted_mean_error"] = pred
        row["predicted_sigma"] = pred_sigma
        row["mean_error_bound_satisfied"] = (
            None if row["mean"] is None or pred is None else row["mean"] <= pred + 3 * row["mean_sigma"])
        errs = np.array([r.test_error for r in batch if r.found])
        ratio, phi_ok, cor1 = {}, {}, {}
        for e in eps_all:
            ratio_v = bound("ratio", n, epsilon=e)
            ratio[_key(e)] = ratio_v
            if errs.size and ratio_v is not None:
                bad = (errs >= doc.e_min + e).astype(float)
                sig = bootstrap_sigma(bad, seed=config.seed, key=n)
                phi_ok[_key(e)] = bool(bad.mean() <= ratio_v + 3 * sig)
            cor1[_key(e)] = {_key(a): {"tight": bound("corollary1_bound", n, epsilon=e, a=a),
                                       "exp_form": bound("corollary1_exp", n, epsilon=e, a=a)}
                             for a in config.bounds.a_values}
        row.update(ratio=ratio, phi_bound_satisfied=phi_ok, corollary1=cor1)
        per_n.append(row)

    correlation = []
    if (d / "volumes.csv").exists():
        pairs = volumes_from_csv((d / "volumes.csv").read_text())
        for n in sorted({p.n for p in pairs}):
            for e in sorted({p.epsilon for p in pairs}):
                group = [p for p in pairs if p.n == n and p.epsilon == e]
                entry = {"n": n, "epsilon": e, "training_sets": len(group)}
                try:
                    cd = correlation_diagnostic(group, seed=config.seed)
                    entry.update(pairs_used=cd.pairs_used, covariance=cd.covariance,
                                 covariance_ci=list(cd.covariance_ci), ratio_of_means=cd.ratio_of_means,
                                 mean_of_ratios=cd.mean_of_ratios, difference_sigma=cd.difference_sigma,
                                 inequality_holds=cd.inequality_holds)
                except InsufficientDataError as exc:
                    entry["error"] = str(exc)
                correlation.append(entry)

    return {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_dict(),
        "provenance": {"seed": config.seed, "generator": GENERATOR_NAME, "doclab": __version__,
                       "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()},
        "doc": {"total_samples": doc.total_samples, "bin_count": doc.bin_count, "e_min": doc.e_min,
                "e_min_policy": doc.e_min_policy, "e_min_estimate": doc.e_min_estimate,
                "dataset_id": doc.dataset_id,
                "g_epsilon": {_key(e): g_epsilon(doc, e) for e in eps_all},
                "omega_epsilon": {_key(e): omega_epsilon(doc, e) for e in eps_all},
                "corollary1_inputs": {_key(e): {_key(a): corollary1_for_doc(doc, 0, e, a, False)[0]
                                                for a in config.bounds.a_values} for e in eps_all}},
        "per_n": per_n,
        "correlation": correlation,
    }


def stage_report(exp_or_config, d: Path, workers: int = 1) -> dict:
    config = exp_or_config.config if isinstance(exp_or_config, Experiment) else exp_or_config
    report = build_report(config, d)
    _write(d / "report.json", _json(report))
    emit_plot_data(report, DocHistogram.load(d / "doc.json"), d)
    return report


_RUNNERS = {"doc": stage_doc, "qn": stage_qn, "volumes": stage_volumes, "bounds": stage_bounds,
            "report": stage_report}


def _marker(d: Path) -> dict:
    path = d / "stage.json"
    return json.loads(path.read_text()) if path.exists() else {"completed": [], "failed": None}


def run_experiment(config: ExperimentConfig, out_dir, stages=STAGES, workers: int | None = None) -> Path:
    """Run ``stages`` in pipeline order and return the artifact directory.

    A failing stage is recorded in stage.json and re-raised as StageError;
    artifacts of earlier stages stay in place.
    """
    d = artifact_dir(config, out_dir)
    d.mkdir(parents=True, exist_ok=True)
    workers = config.workers if workers is None else workers
    _write(d / "config.json", _json(config.to_dict()))
    marker = _marker(d)
    timing_path = d / "timing.json"
    timing = json.loads(timing_path.read_text()) if timing_path.exists() else {}
    exp = None
    for stage in STAGES:
        if stage not in stages:
            continue
        t0 = time.perf_counter()
        try:
            if exp is None and stage != "report":
                exp = build_experiment(config)
            _RUNNERS[stage](exp if exp is not None else config, d, workers)
        except Exception as exc:
            marker["failed"] = {"stage": stage, "error": f"{type(exc).__name__}: {exc}"}
            _write(d / "stage.json", _json(marker))
            raise StageError(stage, exc) from exc
        timing[stage] = time.perf_counter() - t0
        if stage not in marker["completed"]:
            marker["completed"].append(stage)
        marker["failed"] = None
        _write(d / "stage.json", _json(marker))
        _write(timing_path, _json(timing))
    return d
