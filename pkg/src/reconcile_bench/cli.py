"""Command-line front end: ``run``, ``nephio`` and ``summarize``.

Exit codes: 0 success, 2 configuration error, 3 capacity error, 4 I/O error,
1 for an internal model fault.
Every failure prints exactly one line starting with ``error:`` on stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .cluster import CapacityError, ClusterError
from .harness import DEFAULT_MAX, ConfigError, ExperimentParams, aggregate, run_scenario
from .nephio import NephioError
from .presets import PresetError, resolve
from .reconcilers import PROFILES, ProfileError
from .results import ResultsFormatError, aggregated_csv, parse_raw, raw_csv, read_raw, summary_csv, write_text
from .sampling import DistributionError
from .sim import SimulationError
from .stats import render_table, summarize

EXIT_OK, EXIT_MODEL, EXIT_CONFIG, EXIT_CAPACITY, EXIT_IO = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(sp):
    sp.add_argument("--max", type=int, default=None, help="largest scale point m (default per scenario)")
    sp.add_argument("--reps", type=int, default=20, help="repetitions r per scale point")
    sp.add_argument("--step", type=int, default=10, help="grid step c")
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--preset", default="table3", help="preset name or path to an .ini file")
    sp.add_argument("--out", default="results", help="output directory")
    sp.add_argument("--trace", action="store_true", help="write the event trace to trace.txt")
    sp.add_argument("--parallel", type=int, default=1, help="worker processes")
    sp.add_argument("--state-dump", action="store_true", help="write cluster state after every cleanup")
    sp.add_argument("--noise-free", action="store_true", help="replace every distribution by its center")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="reconcile-bench", description="GitOps reconciler benchmark on a simulated cluster")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    run = sub.add_parser("run", help="single-app or multi-app experiment")
    run.add_argument("--scenario", default="single-app", help="single-app or multi-app")
    run.add_argument("--profile", action="append", default=None,
                     help=f"reconciler profile, repeatable ({', '.join(PROFILES)}; default all)")
    _common(run)

    neph = sub.add_parser("nephio", help="intent hydration experiment")
    neph.add_argument("--mode", default="multi", help="single or multi")
    neph.add_argument("--profile", default=None, help="downstream reconciler (default from the preset)")
    _common(neph)

    summ = sub.add_parser("summarize", help="recompute the summary from raw CSV files")
    summ.add_argument("inputs", nargs="*", help="raw CSV files")
    summ.add_argument("--out", default="results")
    summ.add_argument("--preset", default="", help="preset label for the header comment")
    return ap


def _params(p: str, args, scenario: str) -> ExperimentParams:
    m = DEFAULT_MAX[scenario] if args.max is None else args.max
    return ExperimentParams(p, m, args.reps, args.step)


def _check_profile(p: str) -> str:
    if p not in PROFILES:
        raise ProfileError(f"unknown profile {p!r}; valid profiles are {', '.join(PROFILES)}")
    return p


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(results, out: Path, preset_name: str, trace: bool, state_dump: bool) -> None:
    records = [r for res in results for r in res.records]
    failures = sum(res.failures for res in results)
    raw = raw_csv(records)
    write_text(out / "raw.csv", raw)
    aggs = [a for res in results if res.records for a in aggregate(res.records, res.params)]
    write_text(out / "aggregated.csv", aggregated_csv(aggs))
    # summarise what was written so a later ``summarize`` of raw.csv reproduces it
    rows = summarize(parse_raw(raw)) if records else []
    write_text(out / "summary.txt", render_table(rows, preset_name, failures))
    write_text(out / "summary.csv", summary_csv(rows, preset_name, failures))
    if trace:
        lines = []
        for res in results:
            for it in res.iterations:
                lines.append(f"# scenario={res.scenario} profile={res.profile} k={it.k} rep={it.rep}")
                lines.extend(it.trace)
        write_text(out / "trace.txt", "\n".join(lines) + "\n")
    if state_dump:
        lines = []
        for res in results:
            lines.append(f"# scenario={res.scenario} profile={res.profile}")
            lines.extend(it.state_line for it in res.iterations)
        write_text(out / "cluster_state.txt", "\n".join(lines) + "\n")
    if failures:
        print(f"warning: {failures} failed iterations excluded", file=sys.stderr)


def cmd_run(args) -> int:
    scenario = args.scenario
    if scenario not in ("single-app", "multi-app"):
        raise ConfigError(f"unknown scenario {scenario!r} for run; use single-app or multi-app")
    profiles = [_check_profile(p) for p in (args.profile or PROFILES)]
    preset = resolve(args.preset, args.noise_free)
    plans = [_params(p, args, scenario) for p in profiles]  # validate everything up front
    out = _outdir(args.out)
    results = [run_scenario(ep, scenario, preset, args.seed, parallel=args.parallel, trace=args.trace)
               for ep in plans]
    _emit(results, out, preset.name, args.trace, args.state_dump)
    return EXIT_OK


def cmd_nephio(args) -> int:
    mode = args.mode
    if mode not in ("single", "multi"):
        raise ConfigError(f"unknown nephio mode {mode!r}; use single or multi")
    scenario = f"nephio-{mode}"
    preset = resolve(args.preset, args.noise_free)
    p = _check_profile(args.profile or preset.nephio_profile)
    ep = _params(p, args, scenario)
    out = _outdir(args.out)
    res = run_scenario(ep, scenario, preset, args.seed, parallel=args.parallel, trace=args.trace)
    _emit([res], out, preset.name, args.trace, args.state_dump)
    return EXIT_OK


def cmd_summarize(args) -> int:
    if not args.inputs:
        raise ConfigError("no input CSV files")
    records = []
    for path in args.inputs:
        records.extend(read_raw(path))
    out = _outdir(args.out)
    rows = summarize(records)
    write_text(out / "summary.txt", render_table(rows, args.preset))
    write_text(out / "summary.csv", summary_csv(rows, args.preset))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "nephio": cmd_nephio, "summarize": cmd_summarize}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(message)s")
        if not args.command:
            raise UsageError("a command is required: run, nephio or summarize")
        return COMMANDS[args.command](args)
    except CapacityError as exc:
        return _fail(exc, EXIT_CAPACITY)
    except (UsageError, ConfigError, PresetError, ProfileError, DistributionError, NephioError,
            ResultsFormatError) as exc:
        return _fail(exc, EXIT_CONFIG)
    except OSError as exc:
        return _fail(exc, EXIT_IO)
    except (ClusterError, SimulationError) as exc:
        return _fail(exc, EXIT_MODEL)


def _fail(exc, code: int) -> int:
    msg = " ".join(str(exc).split())
    print(f"error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
