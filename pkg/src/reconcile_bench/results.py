"""CSV emission and parsing for raw records, per-k aggregates and summaries.

Fixed column order, ``.`` decimal separator, six decimals, LF line endings.
Unmeasured metrics are empty cells.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Sequence

from .harness import AggregatedKpi, KpiRecord
from .stats import QUARTILE_NOTE, SummaryRow

RAW_COLUMNS = ("scenario", "profile", "k", "rep", "t_push_s", "t_sync_s", "t_recon_s", "t_deploy_s",
               "t_healthy_s", "u_cpu_millicore", "u_mem_mib", "seed")
NEPHIO_COLUMNS = ("t_inproc_s", "t_hydrate_s", "t_oh_s")
AGG_COLUMNS = ("scenario", "profile", "k", "n_reps", "t_push_s", "t_sync_s", "t_recon_s", "t_deploy_s",
               "t_healthy_s", "u_cpu_millicore", "u_mem_mib")
SUMMARY_COLUMNS = ("tool", "scenario", "metric", "mu", "sigma", "n_used", "n_removed")

COLUMN_METRIC = {
    "t_push_s": "t_push", "t_sync_s": "t_sync", "t_recon_s": "t_recon", "t_deploy_s": "t_deploy",
    "t_healthy_s": "t_healthy", "u_cpu_millicore": "u_cpu", "u_mem_mib": "u_mem",
    "t_inproc_s": "t_inproc", "t_hydrate_s": "t_hydrate", "t_oh_s": "t_oh",
}


class ResultsFormatError(ValueError):
    pass


def fmt(v) -> str:
    return "" if v is None else f"{v:.6f}"


def _columns(nephio: bool, base: Sequence[str]) -> tuple:
    if not nephio:
        return tuple(base)
    if base[-1] == "seed":
        return tuple(base[:-1]) + NEPHIO_COLUMNS + ("seed",)
    return tuple(base) + NEPHIO_COLUMNS


def _has_nephio(items) -> bool:
    return any(i.scenario.startswith("nephio") for i in items)


def _write(rows: Iterable[Sequence[str]], header: Sequence[str], comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def raw_csv(records: Sequence[KpiRecord]) -> str:
    cols = _columns(_has_nephio(records), RAW_COLUMNS)
    rows = []
    for r in records:
        row = []
        for c in cols:
            if c in COLUMN_METRIC:
                row.append(fmt(r.value(COLUMN_METRIC[c])))
            else:
                row.append(str(getattr(r, c)))
        rows.append(row)
    return _write(rows, cols)


def aggregated_csv(aggs: Sequence[AggregatedKpi]) -> str:
    cols = _columns(_has_nephio(aggs), AGG_COLUMNS)
    rows = []
    for a in aggs:
        rows.append([fmt(a.values.get(COLUMN_METRIC[c])) if c in COLUMN_METRIC else str(getattr(a, c))
                     for c in cols])
    return _write(rows, cols)


def summary_csv(rows: Sequence[SummaryRow], preset: str = "", failures: int = 0) -> str:
    comments = [f"{QUARTILE_NOTE}; preset: {preset or '-'}; failed iterations excluded: {failures}"]
    body = [[r.tool, r.scenario, r.metric, fmt(r.mu), fmt(r.sigma), str(r.n_used), str(r.n_removed)]
            for r in rows]
    return _write(body, SUMMARY_COLUMNS, comments)


def parse_raw(text: str, source: str = "<input>") -> list:
    """Parse a raw CSV back into records; the header must match exactly."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines:
        raise ResultsFormatError(f"{source}: empty input")
    reader = csv.reader(lines)
    header = next(reader)
    nephio = len(header) > len(RAW_COLUMNS)
    expected = _columns(nephio, RAW_COLUMNS)
    for i, col in enumerate(expected):
        if i >= len(header) or header[i] != col:
            got = header[i] if i < len(header) else "<missing>"
            raise ResultsFormatError(f"{source}: bad header column {i + 1}: expected {col!r}, got {got!r}")
    if len(header) != len(expected):
        raise ResultsFormatError(f"{source}: bad header column {len(expected) + 1}: unexpected {header[len(expected)]!r}")
    records = []
    for n, row in enumerate(reader, start=2):
        if len(row) != len(expected):
            raise ResultsFormatError(f"{source}: line {n} has {len(row)} fields, expected {len(expected)}")
        d = dict(zip(expected, row))
        try:
            vals = {COLUMN_METRIC[c]: (float(d[c]) if d[c] != "" else None) for c in expected if c in COLUMN_METRIC}
            records.append(KpiRecord(d["scenario"], d["profile"], int(d["k"]), int(d["rep"]),
                                     seed=int(d["seed"]), **vals))
        except ValueError as exc:
            raise ResultsFormatError(f"{source}: line {n}: {exc}") from None
    if not records:
        raise ResultsFormatError(f"{source}: no data rows")
    return records


def read_raw(path) -> list:
    path = Path(path)
    return parse_raw(path.read_text(encoding="utf-8"), str(path))


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")


__all__ = ["RAW_COLUMNS", "NEPHIO_COLUMNS", "ResultsFormatError", "aggregated_csv", "parse_raw",
           "raw_csv", "read_raw", "summary_csv"]
