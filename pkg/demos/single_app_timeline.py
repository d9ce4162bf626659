"""Walk through one single-app iteration and print its event timeline.

    python demos/single_app_timeline.py --profile flux --k 3
"""

import argparse

from reconcile_bench.harness import ExperimentParams, run_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--profile", default="argo")
    ap.add_argument("--k", type=int, default=1, help="replica count")
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    res = run_scenario(ExperimentParams(args.profile, args.k, 1, args.k), "single-app", "table3", args.seed,
                       trace=True)
    it = res.iterations[-1]
    print(f"{args.profile} single-app, k={it.k}, seed={args.seed}")
    print(f"{'ms':>9}  {'seq':>4}  event")
    for line in it.trace:
        ms, seq, kind = line.split(",", 2)
        print(f"{int(ms):>9}  {int(seq):>4}  {kind}")
    rec = res.records[-1]
    print()
    for m in ("t_push", "t_sync", "t_recon", "t_deploy"):
        print(f"{m:9s} {rec.value(m):10.4f} s total, {rec.standardised(m):8.4f} s per replica")
    print(f"state after cleanup matches fresh cluster: {it.state_hash == it.baseline_hash}")


if __name__ == "__main__":
    main()
