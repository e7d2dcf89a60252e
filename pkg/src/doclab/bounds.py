"""Bounds and predictions computed from a DOC histogram.

All volumes are integrals of ``(1 - E)**n`` against the histogram density,
taken exactly on each bin (the histogram is piecewise uniform), and
accumulated in log space: ``(1 - E)**n`` underflows once ``n * E`` passes a
few hundred.

Notation in names: ``volume`` is the sphere-normalised parameter volume,
``ratio`` the mean bad volume over the mean volume of all zero-error
solutions.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .doc import DocHistogram, _check_eps, g_epsilon, omega_epsilon
from .sphere import BOOTSTRAP_STREAM, derive_stream


class DegenerateDocError(ValueError):
    """The histogram carries no weight for the requested integral."""


def _log_piece_terms(lo: np.ndarray, hi: np.ndarray, mass: np.ndarray, n: int) -> np.ndarray:
    """log(mass * mean of (1-E)^n over [lo, hi]) per piece; -inf for empty pieces."""
    width = hi - lo
    out = np.full(lo.shape, -np.inf)
    point = (width == 0) & (mass > 0)
    if point.any():
        # point mass: (1-E)^n itself; 0^0 = 1
        with np.errstate(divide="ignore"):
            out[point] = np.log(mass[point]) + (n * np.log1p(-lo[point]) if n else 0.0)
    ok = (width > 0) & (mass > 0) & (lo < 1.0)
    if not ok.any():
        return out
    a, w, m = 1.0 - lo[ok], width[ok], mass[ok]
    k = n + 1
    with np.errstate(divide="ignore"):
        log_ratio = np.log1p(-w / a)             # log((1-hi)/(1-lo)), -inf when hi == 1
        log_span = np.log(-np.expm1(k * log_ratio))
        out[ok] = np.log(m) + k * np.log(a) + log_span - np.log(k * w)
    return out


def _pieces_above(doc: DocHistogram, threshold: float | None):
    lo, hi = doc.supports()
    mass = doc.masses
    if threshold is None:
        return lo, hi, mass
    width = hi - lo
    point = width == 0
    new_lo = np.maximum(lo, threshold)
    frac = np.where(point, (lo >= threshold).astype(float),
                    np.clip((hi - new_lo) / np.where(point, 1.0, width), 0.0, 1.0))
    return np.where(point, lo, np.minimum(new_lo, hi)), hi, mass * frac


def log_volume(doc: DocHistogram, n: int, threshold: float | None = None) -> float:
    """log of the integral of (1-E)^n D(E) over E >= threshold (whole [0,1] if None)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    terms = _log_piece_terms(*_pieces_above(doc, threshold), n)
    if np.all(np.isneginf(terms)):
        return -math.inf
    return float(logsumexp(terms))


def mean_bad_volume(doc: DocHistogram, n: int, epsilon: float) -> float:
    """Expected normalised volume of zero-training-error solutions with E >= E_min + eps."""
    _check_eps(doc, epsilon)
    return math.exp(log_volume(doc, n, doc.e_min + epsilon))


def mean_solution_volume(doc: DocHistogram, n: int) -> float:
    """Expected normalised volume of all zero-training-error solutions (integral over [0, 1])."""
    return math.exp(log_volume(doc, n))


def bad_fraction_ratio(doc: DocHistogram, n: int, epsilon: float) -> float:
    """Mean bad volume over mean volume of all solutions at training-set size n."""
    _check_eps(doc, epsilon)
    denom = log_volume(doc, n)
    if denom == -math.inf:
        raise DegenerateDocError("histogram has no mass: solution volume is zero")
    return math.exp(log_volume(doc, n, doc.e_min + epsilon) - denom)


def corollary1_bound(g_eps_over_a: float, omega_eps_frac: float, epsilon: float, n: int, a: float,
                     with_exp_form: bool = True) -> tuple[float, float | None]:
    """Ratio bound for a good fraction ``g`` (at eps/a) and bad volume ``omega`` (at eps).

    ``tight = omega / ((1-g) + g*exp((1-1/a)*eps*n))`` and
    ``exp_form = exp(-(1-1/a)*eps*n) / g``; a = 2 gives the standard form.
    """
    if a <= 1:
        raise ValueError(f"a must exceed 1, got {a}")
    g = float(g_eps_over_a)
    if not 0.0 <= g <= 1.0:
        raise ValueError(f"good fraction must lie in [0, 1], got {g}")
    k = (1.0 - 1.0 / a) * epsilon * n
    if g == 0.0:
        if with_exp_form:
            raise ZeroDivisionError("exponential form needs a non-zero good fraction g_{eps/a}")
        return float(omega_eps_frac), None
    log_denom = np.logaddexp(math.log1p(-g) if g < 1.0 else -math.inf, math.log(g) + k)
    tight = omega_eps_frac * math.exp(-log_denom) if omega_eps_frac > 0 else 0.0
    exp_form = math.exp(-k) / g if with_exp_form else None
    return tight, exp_form


def corollary1_for_doc(doc: DocHistogram, n: int, epsilon: float, a: float = 2.0,
                       with_exp_form: bool = True) -> tuple[float, float | None]:
    return corollary1_bound(g_epsilon(doc, epsilon / a), omega_epsilon(doc, epsilon), epsilon, n, a,
                            with_exp_form)


def markov_tail(doc: DocHistogram, n: int, epsilon: float, gamma: float) -> float:
    """Upper bound on P(bad fraction >= gamma), capped at 1."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return min(1.0, bad_fraction_ratio(doc, n, epsilon) / gamma)


def predicted_mean_error(doc: DocHistogram, n: int) -> float:
    """Mean true error over zero-training-error solutions predicted from the DOC.

    Uses the identity  int E(1-E)^n D / int (1-E)^n D = 1 - V(n+1)/V(n).
    """
    denom = log_volume(doc, n)
    if denom == -math.inf:
        raise DegenerateDocError(f"no solution volume left at n={n}")
    return float(-math.expm1(log_volume(doc, n + 1) - denom))


@dataclass
class QnPrediction:
    lo: np.ndarray
    hi: np.ndarray
    mass: np.ndarray
    mean_error: np.ndarray  # conditional mean of E within each bin

    @property
    def mean(self) -> float:
        return float(np.sum(self.mass * self.mean_error))


def qn_predicted(doc: DocHistogram, n: int) -> QnPrediction:
    """Predicted normalised density of zero-training-error solutions over E."""
    lo, hi, mass = _pieces_above(doc, None)
    t_n = _log_piece_terms(lo, hi, mass, n)
    if np.all(np.isneginf(t_n)):
        raise DegenerateDocError(f"no solution volume left at n={n}")
    t_n1 = _log_piece_terms(lo, hi, mass, n + 1)
    q = np.exp(t_n - logsumexp(t_n))
    mean_e = np.where(np.isfinite(t_n), -np.expm1(t_n1 - np.where(np.isfinite(t_n), t_n, 0.0)),
                      0.5 * (lo + hi))
    return QnPrediction(lo, hi, q, mean_e)


def predicted_mean_error_sigma(doc: DocHistogram, n: int, resamples: int = 200, seed: int = 0) -> float:
    """Spread of the prediction under Poisson resampling of the bin counts."""
    rng = derive_stream(seed, BOOTSTRAP_STREAM, 0, n)
    vals = []
    for _ in range(resamples):
        counts = rng.gen.poisson(doc.counts)
        if counts.sum() == 0:
            continue
        boot = DocHistogram(counts, doc.e_min_estimate, doc.e_min, doc.e_min_policy)
        vals.append(predicted_mean_error(boot, n))
    return float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0


BOUND_KINDS = ("mean_bad_volume", "ratio", "corollary1_bound", "corollary1_exp", "markov_tail",
               "predicted_mean_error")


@dataclass
class BoundCurve:
    kind: str
    n_values: list[int]
    values: list[float]
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in BOUND_KINDS:
            raise ValueError(f"unknown bound kind {self.kind!r}")


def bound_curves(doc: DocHistogram, n_values, epsilons=(0.2,), a_values=(2.0,), gammas=()) -> list[BoundCurve]:
    """Every bound family evaluated on ``n_values``."""
    n_values = [int(n) for n in n_values]
    curves = [BoundCurve("predicted_mean_error", n_values, [predicted_mean_error(doc, n) for n in n_values])]
    for eps in epsilons:
        p = {"epsilon": eps}
        curves.append(BoundCurve("mean_bad_volume", n_values, [mean_bad_volume(doc, n, eps) for n in n_values], p))
        curves.append(BoundCurve("ratio", n_values, [bad_fraction_ratio(doc, n, eps) for n in n_values], p))
        for a in a_values:
            g = g_epsilon(doc, eps / a)
            om = omega_epsilon(doc, eps)
            pairs = [corollary1_bound(g, om, eps, n, a, with_exp_form=g > 0) for n in n_values]
            pa = {"epsilon": eps, "a": a}
            curves.append(BoundCurve("corollary1_bound", n_values, [t for t, _ in pairs], pa))
            if g > 0:
                curves.append(BoundCurve("corollary1_exp", n_values, [e for _, e in pairs], pa))
        for gamma in gammas:
            curves.append(BoundCurve("markov_tail", n_values,
                                     [markov_tail(doc, n, eps, gamma) for n in n_values],
                                     {"epsilon": eps, "gamma": gamma}))
    return curves


BOUND_COLUMNS = ("n", "value", "kind", "epsilon", "a", "gamma")


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def bound_curves_to_csv(curves: list[BoundCurve]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BOUND_COLUMNS)
    for c in curves:
        for n, v in zip(c.n_values, c.values):
            w.writerow([n, _fmt(v), c.kind, _fmt(c.parameters.get("epsilon")),
                        _fmt(c.parameters.get("a")), _fmt(c.parameters.get("gamma"))])
    return buf.getvalue()


def bound_rows_from_csv(text: str) -> list[dict]:
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        rows.append({"n": int(r["n"]), "value": float(r["value"]), "kind": r["kind"],
                     "epsilon": float(r["epsilon"]) if r["epsilon"] else None,
                     "a": float(r["a"]) if r["a"] else None,
                     "gamma": float(r["gamma"]) if r["gamma"] else None})
    return rows
