"""Nephio intents: hydration cost versus the shared overhead per intent.

In multi mode the PackageVariant wait is shared by every intent submitted
together, so the per-intent overhead shrinks as the batch grows.

    python demos/nephio_amortisation.py
"""

import argparse

from reconcile_bench.harness import ExperimentParams, run_scenario
from reconcile_bench.stats import median_trend


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max", type=int, default=81)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    ep = ExperimentParams("csync", args.max, 1, 10)
    multi = run_scenario(ep, "nephio-multi", "table3", args.seed, noise_free=True)
    single = run_scenario(ep, "nephio-single", "table3", args.seed, noise_free=True)
    cols = [dict(median_trend(r.records, m)) for r, m in
            ((multi, "t_hydrate"), (multi, "t_oh"), (multi, "t_inproc"), (single, "t_inproc"))]
    print("intents  hydrate  overhead  in-process  single-mode in-process   (s per intent, noise-free)")
    for k in sorted(cols[0]):
        print(f"{k:7d}  {cols[0][k]:7.2f}  {cols[1][k]:8.2f}  {cols[2][k]:10.2f}  {cols[3][k]:10.2f}")


if __name__ == "__main__":
    main()
