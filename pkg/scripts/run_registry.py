"""Run registry problems with the default restart plan and print a summary table.

    python scripts/run_registry.py --labels I.12.2,I.25.13 --threads 4
"""

import argparse
import json
import logging

from gentree.bench import EASY_SUBSET, REGISTRY, benchmark_config, run_benchmark, summarize
from gentree.scheduler import DEFAULT_PLAN, Phase


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--labels", default=",".join(EASY_SUBSET), help="comma list, or 'all'")
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--time-limit", type=float, default=600.0, help="per phase")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="JSON table path")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    labels = list(REGISTRY) if args.labels == "all" else args.labels.split(",")
    plan = [Phase(p.ops, p.tol, args.time_limit) for p in DEFAULT_PLAN]
    rows = []
    for label in labels:
        row = run_benchmark([label], benchmark_config(time_limit_s=args.time_limit), args.threads,
                            seed=args.seed, plan=plan)[0]
        print(f"{row.label:<10} solved={row.solved} form={row.form_ok} "
              f"{row.elapsed_s:.2f}s {row.formula}", flush=True)
        rows.append(row)
    print()
    print(summarize(rows))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump([r.to_dict() for r in rows], fh, indent=2)


if __name__ == "__main__":
    main()
