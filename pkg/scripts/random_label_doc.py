#!/usr/bin/env python3
"""How the random-label DOC concentrates around 1/2 as the test set grows.

With random labels every classifier has true error 1/2, so any spread in the
measured DOC is test-set noise. For each test-set size the script prints the
DOC mass inside [0.48, 0.52] over several independent labelings, next to the
binomial expectation for a single classifier.
"""
import argparse

import numpy as np
from scipy.stats import binom

from doclab.data import GaussianProblem, gen_gaussian_balanced, with_random_labels
from doclab.doc import estimate_doc
from doclab.nn import Arch
from doclab.sphere import TEST_STREAM, derive_stream


def central_mass(doc, half_width=0.02):
    e = doc.edges
    inside = (e[:-1] >= 0.5 - half_width - 1e-12) & (e[1:] <= 0.5 + half_width + 1e-12)
    return float(doc.masses[inside].sum())


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[500, 2000, 5000, 20000])
    p.add_argument("--labelings", type=int, default=10)
    p.add_argument("--samples", type=int, default=3000)
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args()

    arch, problem = Arch((10, 10, 2)), GaussianProblem()
    print(f"{'test size':>9} {'binomial':>9} {'mean':>7} {'min':>7} {'max':>7}")
    for m in args.sizes:
        masses = []
        for k in range(args.labelings):
            base = gen_gaussian_balanced(problem, m, derive_stream(args.seed, TEST_STREAM, m, k))
            test = with_random_labels(base, derive_stream(args.seed, TEST_STREAM, m, k, 1))
            masses.append(central_mass(estimate_doc(arch, test, args.samples, seed=args.seed + k)))
        # bins [0.48, 0.52) hold mistake counts 0.48 m <= K < 0.52 m
        expected = binom.cdf(np.ceil(0.52 * m) - 1, m, 0.5) - binom.cdf(np.ceil(0.48 * m) - 1, m, 0.5)
        print(f"{m:>9} {expected:>9.4f} {np.mean(masses):>7.4f} {min(masses):>7.4f} {max(masses):>7.4f}")


if __name__ == "__main__":
    main()
