"""Acceptance gate: one test per numbered criterion, each printing a PASS/FAIL line.

Heavy criteria are marked ``slow``; they still run by default. Run only this
gate with ``pytest tests/test_acceptance.py -v -s``.
"""
import math

import numpy as np
import pytest

from doclab.bounds import (bad_fraction_ratio, corollary1_bound, log_volume, mean_bad_volume,
                           predicted_mean_error)
from doclab.cli import main
from doclab.data import (GaussianProblem, GaussianSource, bayes_error_gaussian, gen_gaussian_balanced,
                         with_random_labels)
from doclab.doc import DocHistogram, estimate_doc, g_epsilon, omega_epsilon
from doclab.harness import correlation_diagnostic, sample_qn, sample_volume_pairs, summarize_qn
from doclab.idx import (IMAGES_MAGIC, BadMagicError, CountMismatchError, TruncatedPayloadError,
                        encode_idx, load_idx, parse_idx, write_idx)
from doclab.nn import Arch, weight_count
from doclab.sphere import TEST_STREAM, derive_stream

SEED = 20190
PROBLEM = GaussianProblem(dim=10, center_offset=1.0, class_std=0.5)
SOURCE = GaussianSource(PROBLEM)
SHALLOW, WIDE, DEEP = Arch((10, 10, 2)), Arch((10, 100, 2)), Arch((10,) * 11 + (2,))
N_GRID = (2, 6, 10, 14, 18, 22, 26, 30)
DEEP_N = (2, 6, 10, 14, 18, 22)

# The criterion-3 tolerance cannot be met at the stated test-set size: a random-label test error is
# Binomial(2000, 1/2)/2000 for every classifier, so only about 93% of the mass is within +-0.02 of 1/2.
CRITERION_3_REASON = "binomial test-set noise (sd 0.0112) puts only ~93% of the mass within +-0.02 at 2,000 test samples"
# mean(1/T) of a geometric T with success rate p has expectation -p ln p / (1 - p), not p.
CRITERION_8_REASON = "mean(1/trials_to_hit) is a biased estimator of the solution volume (Jensen on 1/T)"


def report(criterion, ok, detail):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    print("\n" + line)
    _LINES.append(line)
    return ok


_LINES = []


@pytest.fixture(scope="session", autouse=True)
def _summary(request):
    yield
    if _LINES:
        terminal = request.config.pluginmanager.get_plugin("terminalreporter")
        write = terminal.write_line if terminal else print
        write("")
        write("acceptance summary")
        for line in _LINES:
            write("  " + line)


@pytest.fixture(scope="session")
def test_set():
    return gen_gaussian_balanced(PROBLEM, 10_000, derive_stream(SEED, TEST_STREAM))


@pytest.fixture(scope="session")
def shallow_doc(test_set):
    return estimate_doc(SHALLOW, test_set, 100_000, seed=SEED, e_min=PROBLEM.e_min)


@pytest.fixture(scope="session")
def wide_doc(test_set):
    return estimate_doc(WIDE, test_set, 100_000, seed=SEED, e_min=PROBLEM.e_min)


@pytest.fixture(scope="session")
def deep_doc(test_set):
    return estimate_doc(DEEP, test_set, 30_000, seed=SEED, e_min=PROBLEM.e_min)


def qn_batches(arch, test_set, n_values, trials):
    return {n: sample_qn(arch, SOURCE, test_set, n, trials, seed=SEED) for n in n_values}


@pytest.fixture(scope="session")
def shallow_qn(test_set):
    return qn_batches(SHALLOW, test_set, N_GRID, 500)


@pytest.fixture(scope="session")
def wide_qn(test_set):
    return qn_batches(WIDE, test_set, N_GRID, 500)


@pytest.fixture(scope="session")
def deep_qn(test_set):
    return qn_batches(DEEP, test_set, DEEP_N, 300)


def test_criterion_01_weight_counts():
    got = [weight_count(Arch(w)) for w in ((10, 10, 2), (10, 100, 2), (10,) * 11 + (2,), (784, 2), (784, 10, 2))]
    assert report(1, got == [120, 1200, 1020, 1568, 7860], f"weight counts {got}")


def test_criterion_02_bayes_error():
    e = bayes_error_gaussian(PROBLEM)
    assert report(2, abs(e - 0.02275) <= 1e-4, f"Bayes error {e:.6f} (target 0.02275 +- 1e-4)")


def random_label_doc(test_size, samples=10_000):
    base = gen_gaussian_balanced(PROBLEM, test_size, derive_stream(SEED, TEST_STREAM, 3))
    test = with_random_labels(base, derive_stream(SEED, TEST_STREAM, 4))
    doc = estimate_doc(SHALLOW, test, samples, seed=SEED, e_min=0.5)
    # bins lying inside [0.48, 0.52]
    edges = doc.edges
    inside = (edges[:-1] >= 0.48 - 1e-12) & (edges[1:] <= 0.52 + 1e-12)
    return float(doc.masses[inside].sum())


@pytest.mark.xfail(reason=CRITERION_3_REASON, strict=True)
def test_criterion_03_random_label_doc():
    mass = random_label_doc(2000)
    assert report(3, mass >= 0.99, f"random-label DOC mass within 0.5 +- 0.02 = {mass:.4f} "
                                   f"(need >= 0.99; 10^4 samples, 2,000 test samples)")


def test_criterion_03_supplementary_large_test_set():
    # same check with the test-set noise shrunk (sd 0.0035 at 20,000 samples); not the criterion itself
    mass = random_label_doc(20_000)
    assert report("3 (supplementary, 20,000 test samples)", mass >= 0.99,
                  f"mass within 0.5 +- 0.02 = {mass:.4f}")


@pytest.mark.slow
def test_criterion_04_headline_fraction(shallow_qn):
    errs = np.array([r.test_error for r in shallow_qn[30] if r.found])
    frac = float(np.mean(errs < 0.2))
    assert report(4, len(shallow_qn[30]) == 500 and frac >= 0.70,
                  f"n=30, {errs.size} solutions: fraction with test error < 0.2 = {frac:.3f} (need >= 0.70)")


def mean_vs_prediction(doc, batches):
    rows = []
    for n, recs in sorted(batches.items()):
        s = summarize_qn(recs, doc.e_min, seed=SEED)
        rows.append((n, s.mean, s.mean_sigma, predicted_mean_error(doc, n)))
    return rows


@pytest.mark.slow
@pytest.mark.parametrize("name", ["shallow", "wide"])
def test_criterion_05_prediction_matches(name, request):
    doc = request.getfixturevalue(f"{name}_doc")
    rows = mean_vs_prediction(doc, request.getfixturevalue(f"{name}_qn"))
    worst = max(abs(m - p) for _, m, _, p in rows)
    detail = ", ".join(f"n={n}: {m:.3f}/{p:.3f}" for n, m, _, p in rows)
    arch = "[10,10,2]" if name == "shallow" else "[10,100,2]"
    assert report(5, worst <= 0.03, f"{arch} empirical/predicted mean error: {detail}; max gap {worst:.4f} (<= 0.03)")


@pytest.mark.slow
@pytest.mark.parametrize("name", ["shallow", "wide", "deep"])
def test_criterion_06_bound_dominance(name, request):
    doc = request.getfixturevalue(f"{name}_doc")
    rows = mean_vs_prediction(doc, request.getfixturevalue(f"{name}_qn"))
    ok = all(m <= p + 3 * s for _, m, s, p in rows)
    strict = [n for n, m, s, p in rows if m + 3 * s < p]
    detail = ", ".join(f"n={n}: {m:.3f}+-{s:.3f} vs {p:.3f}" for n, m, s, p in rows)
    assert report(6, ok, f"{name} Gaussian net, mean <= predicted + 3 sigma at every n: {detail}; "
                         f"strictly below at n={strict}")


@pytest.mark.skip(reason="no MNIST IDX files are available in this environment")
def test_criterion_06_mnist():
    pass


def naive_volume(doc, n, threshold):
    lo, hi = doc.supports()
    width = hi - lo
    lo = np.maximum(lo, threshold)
    terms = np.where(hi > lo, doc.masses / width * ((1 - lo) ** (n + 1) - (1 - hi) ** (n + 1)) / (n + 1), 0.0)
    return float(terms.sum())


def random_histogram(rng):
    counts = rng.integers(0, 1000, 100) * (rng.random(100) < rng.uniform(0.2, 1.0))
    counts[rng.integers(0, 100)] += 1
    first = np.flatnonzero(counts)[0]
    e_min = (first + rng.random()) / 100
    return DocHistogram(counts, e_min, e_min, "estimated")


def test_criterion_07_bound_chain():
    rng = np.random.default_rng(SEED)
    failures, checked, naive_checked = [], 0, 0
    for h in range(50):
        doc = random_histogram(rng)
        for eps in (0.05, 0.1, 0.2, 0.4):
            if eps > 1 - doc.e_min:
                continue
            om = omega_epsilon(doc, eps)
            prev_ratio = prev_mean = math.inf
            for n in range(201):
                bad = mean_bad_volume(doc, n, eps)
                ratio = bad_fraction_ratio(doc, n, eps)
                mean = predicted_mean_error(doc, n)
                if bad > om * (1 - (doc.e_min + eps)) ** n * (1 + 1e-12) + 1e-300:
                    failures.append(("theorem", h, eps, n))
                for a in (1.5, 2.0, 4.0):
                    g = g_epsilon(doc, eps / a)
                    tight, exp_form = corollary1_bound(g, om, eps, n, a, with_exp_form=g > 0)
                    if ratio > tight * (1 + 1e-12) + 1e-300 or (exp_form is not None and tight > exp_form * (1 + 1e-12)):
                        failures.append(("corollary", h, eps, n, a))
                if ratio > prev_ratio * (1 + 1e-12) or mean > prev_mean * (1 + 1e-12):
                    failures.append(("monotone", h, eps, n))
                naive = naive_volume(doc, n, doc.e_min + eps)
                if np.isfinite(naive) and naive > 1e-250:
                    naive_checked += 1
                    if abs(math.exp(log_volume(doc, n, doc.e_min + eps)) - naive) > 1e-12 * naive:
                        failures.append(("log-vs-naive", h, eps, n))
                prev_ratio, prev_mean = ratio, mean
                checked += 1
    assert report(7, not failures, f"{checked} (histogram, eps, n) points x 3 values of a, "
                                   f"{naive_checked} log/naive comparisons, failures: {failures[:5]}")


def bootstrap_ci(values, stat=np.mean, resamples=1000, key=0):
    values = np.asarray(values, dtype=float)
    rng = derive_stream(SEED, 6, 9, key)
    idx = rng.gen.integers(0, values.size, size=(resamples, values.size))
    boots = np.array([stat(values[i]) for i in idx])
    return float(np.quantile(boots, 0.025)), float(np.quantile(boots, 0.975))


@pytest.fixture(scope="session")
def cross_oracle_batches(test_set):
    return {n: sample_qn(SHALLOW, SOURCE, test_set, n, 500, seed=SEED + 1) for n in (5, 10, 15)}


@pytest.mark.xfail(reason=CRITERION_8_REASON, strict=True)
@pytest.mark.slow
def test_criterion_08_inverse_trials(shallow_doc, cross_oracle_batches):
    parts, ok = [], True
    for n, recs in cross_oracle_batches.items():
        inv = [1.0 / r.trials_to_hit for r in recs]
        lo, hi = bootstrap_ci(inv, key=n)
        target = mean_bad_volume(shallow_doc, n, 0.0)
        ok &= lo <= target <= hi
        parts.append(f"n={n}: mean(1/T)={np.mean(inv):.4f} CI [{lo:.4f}, {hi:.4f}] vs {target:.4f}")
    assert report(8, ok, "; ".join(parts))


@pytest.mark.slow
def test_criterion_08_supplementary_first_draw_rate(shallow_doc, cross_oracle_batches):
    # P(first draw fits) averaged over training sets is exactly the mean solution volume;
    # the tolerance adds the DOC's own Poisson spread to the 95% bootstrap interval
    parts, ok = [], True
    for n, recs in cross_oracle_batches.items():
        hits = [float(r.trials_to_hit == 1) for r in recs]
        lo, hi = bootstrap_ci(hits, key=100 + n)
        target = mean_bad_volume(shallow_doc, n, 0.0)
        slack = 2 * volume_sigma(shallow_doc, n)
        ok &= lo - slack <= target <= hi + slack
        parts.append(f"n={n}: first-draw rate {np.mean(hits):.4f} CI [{lo:.4f}, {hi:.4f}] vs {target:.4f}")
    assert report("8 (supplementary, unbiased estimator)", ok, "; ".join(parts))


def volume_sigma(doc, n, resamples=200):
    rng = derive_stream(SEED, 6, 10, n)
    vals = []
    for _ in range(resamples):
        boot = DocHistogram(rng.gen.poisson(doc.counts), doc.e_min_estimate, doc.e_min, doc.e_min_policy)
        vals.append(mean_bad_volume(boot, n, 0.0))
    return float(np.std(vals, ddof=1))


@pytest.mark.slow
def test_criterion_09_correlation(test_set):
    pairs = sample_volume_pairs(SHALLOW, SOURCE, test_set, 10, 200, 100_000, [0.2], PROBLEM.e_min, SEED)
    cd = correlation_diagnostic(pairs, bootstrap=1000, seed=SEED)
    assert report(9, cd.inequality_holds,
                  f"{cd.pairs_used} sets: mean of ratios {cd.mean_of_ratios:.4f} vs ratio of means "
                  f"{cd.ratio_of_means:.4f} (2 sigma = {2 * cd.difference_sigma:.4f}); "
                  f"cov(phi, omega) = {cd.covariance:.3e}, 95% CI [{cd.covariance_ci[0]:.3e}, {cd.covariance_ci[1]:.3e}]")


DETERMINISM_CFG = """
name = "determinism"
seed = 5
[problem]
kind = "gaussian"
test_size = 1500
[arch]
hidden = [10]
[doc]
samples = 5000
[qn]
n_values = [0, 3, 8]
trials_per_n = 24
[volumes]
n_values = [4]
training_sets = 12
probes = 3000
[bounds]
epsilons = [0.1, 0.2]
a_values = [2.0, 4.0]
"""


def test_criterion_10_determinism_and_idx(tmp_path):
    cfg = tmp_path / "det.toml"
    cfg.write_text(DETERMINISM_CFG)
    outputs = {}
    for workers in (1, 8):
        out = tmp_path / f"w{workers}"
        assert main(["run", "--config", str(cfg), "--out-dir", str(out), "--workers", str(workers)]) == 0
        d = out / "determinism" / "seed-5"
        outputs[workers] = {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "timing.json"}
    same = outputs[1] == outputs[8] and len(outputs[1]) >= 12

    images = np.arange(3 * 4 * 5, dtype=np.uint8).reshape(3, 4, 5)
    labels = np.array([7, 1, 2], dtype=np.uint8)
    write_idx(tmp_path / "img", images)
    write_idx(tmp_path / "lab", labels)
    x, y = load_idx(tmp_path / "img", tmp_path / "lab")
    roundtrip = np.array_equal(np.rint(x * 255).astype(np.uint8).reshape(images.shape), images) and \
        np.array_equal(y, labels)
    raised = []
    for build, expected in (
            (lambda: parse_idx(encode_idx(labels), IMAGES_MAGIC), BadMagicError),
            (lambda: parse_idx(encode_idx(images)[:-3], IMAGES_MAGIC), TruncatedPayloadError),
            (lambda: load_idx(tmp_path / "img", write_idx(tmp_path / "short", labels[:2]) or tmp_path / "short"),
             CountMismatchError)):
        try:
            build()
            raised.append(None)
        except Exception as exc:  # noqa: BLE001 - recording which class was raised
            raised.append(type(exc))
    distinct = raised == [BadMagicError, TruncatedPayloadError, CountMismatchError]
    assert report(10, same and roundtrip and distinct,
                  f"{len(outputs[1])} artifacts byte-identical for workers 1 and 8: {same}; IDX round-trip: "
                  f"{roundtrip}; malformed files raise {[c.__name__ if c else None for c in raised]}")
