"""Noise robustness on I.12.2: recover the noiseless power pattern under 1% noise.

The sampled points stay fixed (seed 0); only the noise stream changes.

    python scripts/noise_experiment.py [--label I.12.2] [--seeds 1,2,3,4,5] [--level 1e-2]
"""

import argparse

from gentree.bench import benchmark_config, power_pattern, run_problem
from gentree.enumeration import DEFAULT_OPS
from gentree.scheduler import Phase


def run(label="I.12.2", seeds=(1, 2, 3, 4, 5), level=1e-2, threads=4, verbose=True):
    clean = run_problem(label, threads=threads)
    ref = power_pattern(clean.report.answer)
    if verbose:
        print(f"noiseless: {clean.formula}  pattern={ref}")
    # a fit is accepted once SSE <= level * sum(y^2)
    cfg = benchmark_config(tol=level, tol_relative=True)
    plan = [Phase(DEFAULT_OPS, level, None)]
    rows = []
    for seed in seeds:
        row = run_problem(label, cfg, threads, noise=level, noise_seed=seed, plan=plan)
        same = row.report.answer is not None and power_pattern(row.report.answer) == ref
        rows.append((seed, same, row))
        if verbose:
            print(f"seed {seed}: {row.status:<9} same_pattern={same}  {row.formula}  ({row.elapsed_s:.2f}s)")
    return ref, rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--label", default="I.12.2")
    ap.add_argument("--seeds", default="1,2,3,4,5")
    ap.add_argument("--level", type=float, default=1e-2)
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args()
    seeds = [int(s) for s in args.seeds.split(",")]
    _, rows = run(args.label, seeds, args.level, args.threads)
    print(f"{sum(same for _, same, _ in rows)}/{len(rows)} seeds keep the noiseless pattern")


if __name__ == "__main__":
    main()
