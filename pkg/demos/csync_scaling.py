"""ConfigSync under load: one root-reconciler per app, memory grows linearly.

Also prints the median per-app reconcile time across the grid, which dips
then recovers under the fig5 preset.

    python demos/csync_scaling.py
"""

import argparse

from reconcile_bench.harness import ExperimentParams, run_scenario
from reconcile_bench.stats import median_trend


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max", type=int, default=90)
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    ep = ExperimentParams("csync", args.max, args.reps, 10)
    quiet = run_scenario(ep, "multi-app", "table3", args.seed, noise_free=True)
    print(" apps  instances  memory MiB (noise-free)")
    seen = set()
    for rec, it in zip(quiet.records, quiet.iterations):
        if rec.k in seen:
            continue
        seen.add(rec.k)
        print(f"{rec.k:5d}  {it.cp_instances:9d}  {rec.u_mem:10.1f}")

    res = run_scenario(ep, "multi-app", "fig5", args.seed)
    print("\n apps  median t_recon per app (fig5)")
    for k, m in median_trend(res.records, "t_recon"):
        print(f"{k:5d}  {m:8.2f} s")


if __name__ == "__main__":
    main()
