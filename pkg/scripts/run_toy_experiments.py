#!/usr/bin/env python3
"""Replicate-averaged Q^2 for the three 1-d toy intensities.

Runs the constrained-GP fit on synthetic patterns from toy1/toy2/toy3 for a
range of observation counts and reports mean +/- std of Q^2 across seeded
replicates, one CSV row per (toy, N_o).

Full-scale settings (20 replicates, 10^4 retained samples) take hours; the
defaults are trimmed so a laptop finishes in minutes. Use --full to match
the large configuration.
"""

import argparse
import csv
import os
import time

import numpy as np

import coxgp as cg

TOY_SETTINGS = {
    1: {"domain": (0.0, 50.0), "variance": 4.0, "lengthscale": 8.0},
    2: {"domain": (0.0, 5.0), "variance": 16.0, "lengthscale": 0.25},
    3: {"domain": (0.0, 100.0), "variance": 4.0, "lengthscale": 12.0},
}


def run_one(toy, n_obs, seed, m, n_samples, burn_in):
    setting = TOY_SETTINGS[toy]
    spec = cg.IntensitySpec(f"toy{toy}")
    grid = cg.make_grid(setting["domain"], m)
    system = cg.build_constraint_system([cg.ConstraintSpec.nonnegative()], grid)
    params = cg.KernelParams(setting["variance"], (setting["lengthscale"],))
    pattern = cg.simulate_poisson(spec, (setting["domain"],), spec.default_lambda_max(), n_obs, seed)
    init = cg.initial_coefficients(pattern, grid, system, params=params)
    config = cg.MhConfig(
        eta=1e-3, n_samples=n_samples, burn_in=burn_in, orthant_mc=200, rng_seed=seed + 10_000, init=init
    )
    chain = cg.mh_infer(pattern, grid, system, params, config)
    xs = np.linspace(*setting["domain"], 1000)
    summary = cg.posterior_intensity(chain, xs)
    return cg.q_squared(spec.evaluate(xs), summary.mean), cg.acceptance_rate(chain)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--toys", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--n-obs", type=int, nargs="+", default=[10, 100])
    ap.add_argument("--replicates", type=int, default=5)
    ap.add_argument("--m", type=int, default=100)
    ap.add_argument("--samples", type=int, default=4000)
    ap.add_argument("--burnin", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/toy_q2.csv")
    ap.add_argument("--full", action="store_true", help="20 replicates, 10^4 retained samples")
    args = ap.parse_args()
    if args.full:
        args.replicates, args.samples = 20, 10_000

    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["toy", "n_obs", "replicates", "q2_mean", "q2_std", "seconds"])
        for toy in args.toys:
            for n_obs in args.n_obs:
                started = time.perf_counter()
                q2s = []
                for r in range(args.replicates):
                    q2, acc = run_one(toy, n_obs, args.seed + 37 * r, args.m, args.samples, args.burnin)
                    q2s.append(q2)
                    print(f"toy{toy} N_o={n_obs} rep={r}: Q2={q2:.4f} (acc {acc:.2f})")
                q2s = np.asarray(q2s)
                elapsed = time.perf_counter() - started
                writer.writerow([toy, n_obs, args.replicates, f"{q2s.mean():.6f}", f"{q2s.std(ddof=1):.6f}", f"{elapsed:.1f}"])
                print(f"== toy{toy} N_o={n_obs}: Q2 = {100 * q2s.mean():.1f} +- {100 * q2s.std(ddof=1):.1f} %")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
