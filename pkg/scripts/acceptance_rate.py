#!/usr/bin/env python3
"""Compare two acceptance-rate estimators with the volume predicted from the DOC.

For a training set S the draws until the first fit are geometric with
success rate omega(S), the normalised solution volume. Averaged over S,
1{first draw fits} is unbiased for the mean volume; 1/trials_to_hit is not
(its mean is -p ln p / (1 - p) for a fixed rate p).
"""
import argparse

import numpy as np

from doclab.bounds import mean_solution_volume
from doclab.data import GaussianProblem, GaussianSource, gen_gaussian_balanced
from doclab.doc import estimate_doc
from doclab.harness import sample_qn
from doclab.nn import Arch
from doclab.sphere import TEST_STREAM, derive_stream


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--n", type=int, nargs="+", default=[1, 5, 10, 15])
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--doc-samples", type=int, default=50_000)
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args()

    problem, arch = GaussianProblem(), Arch((10, 10, 2))
    test = gen_gaussian_balanced(problem, 10_000, derive_stream(args.seed, TEST_STREAM))
    doc = estimate_doc(arch, test, args.doc_samples, seed=args.seed, e_min=problem.e_min)
    print(f"{'n':>3} {'predicted':>9} {'first-draw':>10} {'mean 1/T':>9}")
    for n in args.n:
        recs = sample_qn(arch, GaussianSource(problem), test, n, args.trials, seed=args.seed)
        t = np.array([r.trials_to_hit for r in recs], dtype=float)
        print(f"{n:>3} {mean_solution_volume(doc, n):>9.4f} {np.mean(t == 1):>10.4f} {np.mean(1 / t):>9.4f}")


if __name__ == "__main__":
    main()
