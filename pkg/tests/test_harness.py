import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import ks_2samp

from doclab import harness
from doclab.bounds import mean_solution_volume
from doclab.data import GaussianProblem, GaussianSource, LabeledDataset, gen_gaussian_balanced
from doclab.doc import estimate_doc, omega_epsilon
from doclab.harness import (TRIAL_COLUMNS, VOLUME_COLUMNS, EmptyBatchError, Exhausted, InsufficientDataError,
                            Solution, TrialRecord, VolumePair, correlation_diagnostic, estimate_volume_pair,
                            find_zero_train_solution, sample_qn, sample_volume_pairs, summarize_qn,
                            trials_from_csv, trials_to_csv, volumes_from_csv, volumes_to_csv)
from doclab.nn import Arch, empirical_error, mistake_counts, predict, weight_count
from doclab.sphere import derive_stream, sample_unit_sphere, sample_unit_sphere_batch

ARCH = Arch((10, 10, 2))
PROBLEM = GaussianProblem()
SOURCE = GaussianSource(PROBLEM)


@pytest.fixture(scope="module")
def test_set():
    return gen_gaussian_balanced(PROBLEM, 2000, derive_stream(0, 4))


@pytest.fixture(scope="module")
def doc(test_set):
    return estimate_doc(ARCH, test_set, 20_000, seed=11, e_min=PROBLEM.e_min)


def test_empty_train_accepts_first_draw():
    res = find_zero_train_solution(ARCH, SOURCE(0, derive_stream(1, 0)), derive_stream(1, 1))
    assert isinstance(res, Solution) and res.trials_to_hit == 1


@pytest.mark.parametrize("seed", range(5))
def test_matches_one_at_a_time_sampling(seed):
    train = SOURCE(6, derive_stream(seed, 0))
    res = find_zero_train_solution(ARCH, train, derive_stream(seed, 1))
    rng = derive_stream(seed, 1)
    for t in range(1, 10**6):
        w = sample_unit_sphere(weight_count(ARCH), rng)
        if (predict(ARCH, w, train.inputs) == train.labels).all():
            break
    assert res.trials_to_hit == t
    np.testing.assert_array_equal(res.weights, w)
    assert empirical_error(ARCH, res.weights, train) == 0.0


def test_hit_does_not_depend_on_batch_schedule(monkeypatch):
    train = SOURCE(8, derive_stream(3, 0))
    a = find_zero_train_solution(ARCH, train, derive_stream(3, 1))
    monkeypatch.setattr(harness, "_MAX_BATCH", 16)
    monkeypatch.setattr(harness, "_TRAIN_CHUNK", 3)
    b = find_zero_train_solution(ARCH, train, derive_stream(3, 1))
    assert a.trials_to_hit == b.trials_to_hit
    np.testing.assert_array_equal(a.weights, b.weights)


def test_early_rejection_equals_full_check():
    train = SOURCE(30, derive_stream(4, 0))
    w = sample_unit_sphere_batch(5000, weight_count(ARCH), derive_stream(4, 1))
    np.testing.assert_array_equal(harness._fits(ARCH, w, train),
                                  mistake_counts(ARCH, w, train.inputs, train.labels) == 0)


def test_inseparable_train_exhausts():
    train = LabeledDataset(np.array([[1.0], [1.0]]), np.array([0, 1]))
    res = find_zero_train_solution(Arch((1, 2)), train, derive_stream(0, 0), max_trials=1000)
    assert res == Exhausted(1000)


def test_budget_must_be_positive():
    with pytest.raises(ValueError):
        find_zero_train_solution(ARCH, SOURCE(1, derive_stream(0, 0)), derive_stream(0, 1), max_trials=0)


def test_single_sample_geometric_oracle(test_set, doc):
    # output-row swap symmetry makes every single point fitted with probability 1 - mean(E) = 1/2,
    # so trials_to_hit is geometric with mean 1/(1 - mean(E))
    recs = sample_qn(ARCH, SOURCE, test_set, 1, 2000, seed=5)
    t = np.array([r.trials_to_hit for r in recs])
    doc_mean = float(np.sum(doc.masses * np.add(*doc.supports()) / 2))
    expected = 1 / (1 - doc_mean)
    # var of a geometric(1/2) is 2, sd of the mean over 2000 runs 0.032
    assert abs(t.mean() - expected) < 0.15
    assert abs(np.mean(t == 1) - (1 - doc_mean)) < 0.05


def test_first_draw_rate_estimates_solution_volume(test_set, doc):
    recs = sample_qn(ARCH, SOURCE, test_set, 3, 3000, seed=6)
    rate = np.mean([r.trials_to_hit == 1 for r in recs])
    expected = mean_solution_volume(doc, 3)
    sd = np.sqrt(expected * (1 - expected) / 3000)
    assert abs(rate - expected) < 4 * sd + 0.01


def test_q0_is_the_doc(test_set):
    errs = np.array([r.test_error for r in sample_qn(ARCH, SOURCE, test_set, 0, 500, seed=7)])
    w = sample_unit_sphere_batch(5000, weight_count(ARCH), derive_stream(7, 99))
    direct = mistake_counts(ARCH, w, test_set.inputs, test_set.labels) / len(test_set)
    assert ks_2samp(errs, direct).pvalue > 1e-3


def test_sample_qn_deterministic_across_workers(test_set):
    a = sample_qn(ARCH, SOURCE, test_set, 4, 12, seed=3, workers=1)
    b = sample_qn(ARCH, SOURCE, test_set, 4, 12, seed=3, workers=3)
    assert a == b
    assert [r.trial_id for r in a] == list(range(12))
    assert all(r.found and r.trials_to_hit >= 1 and 0 <= r.test_error <= 1 for r in a)


def test_exhausted_trials_are_kept(test_set):
    recs = sample_qn(ARCH, SOURCE, test_set, 60, 4, max_trials_each=20, seed=1)
    assert len(recs) == 4 and not any(r.found for r in recs)
    assert all(r.trials_to_hit == 20 for r in recs)
    with pytest.raises(EmptyBatchError):
        summarize_qn(recs)


def rec(err, i=0, n=3):
    return TrialRecord(i, n, 0, 1, err)


def test_summary_constant():
    s = summarize_qn([rec(0.1, i) for i in range(5)], bootstrap=50)
    assert s.mean == s.q1 == s.median == s.q3 == s.min == s.max == pytest.approx(0.1)
    assert s.mean_sigma < 1e-15


def test_summary_phi():
    s = summarize_qn([rec(0.1), rec(0.3, 1), rec(None, 2)], e_min=0.0, epsilons=[0.2], bootstrap=0)
    assert s.phi_hat == {0.2: 0.5}
    assert s.count == 2 and s.exhausted == 1


def test_summary_quartiles_match_numpy():
    errs = np.linspace(0, 1, 11) ** 2
    s = summarize_qn([rec(e, i) for i, e in enumerate(errs)], bootstrap=0)
    np.testing.assert_allclose([s.q1, s.median, s.q3], np.quantile(errs, [0.25, 0.5, 0.75]))


def test_trials_csv_roundtrip():
    recs = [TrialRecord(0, 2, 123, 7, 0.25, None, False), TrialRecord(1, 2, 456, 100, None, 1.5, True)]
    text = trials_to_csv(recs)
    assert text.splitlines()[0] == ",".join(TRIAL_COLUMNS)
    assert TRIAL_COLUMNS[:6] == ("trial_id", "n", "train_seed", "trials_to_hit", "test_error", "wall_time_ms")
    assert trials_from_csv(text) == recs


def test_volumes_csv_roundtrip():
    pairs = [VolumePair(9, 10, 0.5, 0.125, 1000, 0.2)]
    text = volumes_to_csv(pairs)
    assert text.splitlines()[0] == ",".join(VOLUME_COLUMNS)
    assert volumes_from_csv(text) == pairs


def test_volume_pair_n_zero(test_set, doc):
    p = estimate_volume_pair(ARCH, SOURCE(0, derive_stream(0, 0)), test_set, 20_000, 0.2, PROBLEM.e_min,
                             derive_stream(2, 5))
    assert p.omega_hat == 1.0
    om = omega_epsilon(doc, 0.2)
    sd = np.sqrt(om * (1 - om) * (1 / 20_000 + 1 / doc.total_samples))
    assert abs(p.omega_eps_hat - om) < 4 * sd + 0.01


@given(st.integers(0, 2**20), st.integers(0, 12))
def test_bad_volume_within_volume(seed, n):
    train = SOURCE(n, derive_stream(seed, 0))
    test = gen_gaussian_balanced(PROBLEM, 50, derive_stream(seed, 1))
    p = estimate_volume_pair(ARCH, train, test, 300, 0.1, PROBLEM.e_min, derive_stream(seed, 2))
    assert 0 <= p.omega_eps_hat <= p.omega_hat <= 1


def test_single_class_sets_inflate_volume():
    deep = Arch((10,) * 5 + (2,))
    x = gen_gaussian_balanced(PROBLEM, 6, derive_stream(1, 0)).inputs
    test = gen_gaussian_balanced(PROBLEM, 200, derive_stream(1, 1))
    one = LabeledDataset(x, np.zeros(6))
    mixed = LabeledDataset(x, (x[:, 0] < 0).astype(int))
    a = estimate_volume_pair(deep, one, test, 20_000, 0.2, PROBLEM.e_min, derive_stream(1, 2))
    b = estimate_volume_pair(deep, mixed, test, 20_000, 0.2, PROBLEM.e_min, derive_stream(1, 2))
    assert a.omega_hat > 2 * b.omega_hat
    # the extra solutions sit at the constant-classifier error 1/2
    assert a.phi_hat > b.phi_hat


def test_sample_volume_pairs_deterministic(test_set):
    a = sample_volume_pairs(ARCH, SOURCE, test_set, 3, 4, 500, [0.1, 0.2], PROBLEM.e_min, seed=2)
    b = sample_volume_pairs(ARCH, SOURCE, test_set, 3, 4, 500, [0.1, 0.2], PROBLEM.e_min, seed=2, workers=2)
    assert a == b and len(a) == 8


def vp(omega, omega_eps):
    return VolumePair(0, 5, omega, omega_eps, 1000, 0.2)


def test_correlation_identical_pairs():
    cd = correlation_diagnostic([vp(0.4, 0.1)] * 6, bootstrap=100)
    assert cd.covariance == 0.0
    assert cd.mean_of_ratios == pytest.approx(cd.ratio_of_means)
    assert cd.inequality_holds


def test_correlation_constant_fraction():
    pairs = [vp(w, 0.3 * w) for w in (0.1, 0.2, 0.5, 0.9)]
    cd = correlation_diagnostic(pairs, bootstrap=100)
    assert cd.covariance == pytest.approx(0.0, abs=1e-15)
    assert cd.mean_of_ratios == pytest.approx(cd.ratio_of_means) == pytest.approx(0.3)


def test_correlation_increasing_fraction():
    omegas = np.array([0.1, 0.2, 0.4, 0.8])
    phis = np.array([0.1, 0.2, 0.3, 0.4])
    cd = correlation_diagnostic([vp(w, f * w) for w, f in zip(omegas, phis)], bootstrap=200)
    assert cd.covariance > 0
    assert cd.mean_of_ratios == pytest.approx(phis.mean())
    assert cd.ratio_of_means == pytest.approx((phis * omegas).sum() / omegas.sum())
    assert cd.mean_of_ratios < cd.ratio_of_means
    assert cd.covariance_ci[0] <= cd.covariance_ci[1]


def test_correlation_needs_two_usable_pairs():
    with pytest.raises(InsufficientDataError):
        correlation_diagnostic([vp(0.5, 0.1), vp(0.0, 0.0)])
