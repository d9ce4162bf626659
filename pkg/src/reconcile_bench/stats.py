"""Post-processing: median trends, IQR outlier removal, unbiased sigma and the summary table.

Quartiles use linear interpolation between order statistics at position
(n - 1) q (the "type 7" rule, numpy's default). The IQR fence is applied
within each (tool, scenario, metric) group over values standardised by the
scale variable k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

QUARTILE_METHOD = "linear"
QUARTILE_NOTE = "quartiles: type-7 linear interpolation at (n-1)q; fence [Q1-1.5*IQR, Q3+1.5*IQR] closed"

# Columns reported per scenario (the layout of the summary table)
SCENARIO_METRICS = {
    "single-app": ("t_push", "t_sync", "t_recon", "t_deploy"),
    "multi-app": ("t_recon", "t_deploy", "t_healthy", "u_cpu", "u_mem"),
    "nephio-single": ("t_inproc",),
    "nephio-multi": ("t_inproc", "t_hydrate", "t_oh"),
}
TABLE_COLUMNS = ("t_push", "t_sync", "t_recon", "t_deploy", "t_healthy", "u_cpu", "u_mem",
                 "t_inproc", "t_hydrate", "t_oh")
SCENARIO_ORDER = ("single-app", "multi-app", "nephio-single", "nephio-multi")


def quartiles(values: Sequence[float]) -> tuple:
    x = np.asarray(values, dtype=float)
    q1, q3 = np.quantile(x, [0.25, 0.75], method=QUARTILE_METHOD)
    return float(q1), float(q3)


def iqr_filter(samples: Sequence[float]) -> tuple:
    """Split ``samples`` into (kept, removed) by the closed 1.5 IQR fence; order is preserved."""
    xs = [float(v) for v in samples]
    if not xs:
        return [], []
    q1, q3 = quartiles(xs)
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    kept = [v for v in xs if lo <= v <= hi]
    removed = [v for v in xs if not lo <= v <= hi]
    return kept, removed


def sample_sigma(kept: Sequence[float]) -> Optional[float]:
    """Unbiased sample standard deviation; None for fewer than two samples."""
    x = np.asarray(kept, dtype=float)
    if x.size < 2:
        return None
    return float(np.std(x, ddof=1))


def median(values: Sequence[float]) -> float:
    return float(np.median(np.asarray(values, dtype=float)))


def median_trend(records: Iterable, metric: str, standardised: bool = True) -> list:
    """Per-k median of ``metric``; standardised values are per unit (divided by k)."""
    groups: dict = {}
    for rec in records:
        v = rec.standardised(metric) if standardised else rec.value(metric)
        if v is not None:
            groups.setdefault(rec.k, []).append(v)
    return [(k, median(groups[k])) for k in sorted(groups)]


@dataclass(frozen=True)
class SummaryRow:
    tool: str
    scenario: str
    metric: str
    mu: Optional[float]
    sigma: Optional[float]
    n_used: int
    n_removed: int


def tool_of(rec) -> str:
    return "nephio" if rec.scenario.startswith("nephio") else rec.profile


def summarize(records: Sequence) -> list:
    """One SummaryRow per (tool, scenario, metric), in a stable order."""
    groups: dict = {}
    for rec in records:
        for metric in SCENARIO_METRICS.get(rec.scenario, ()):
            v = rec.standardised(metric)
            if v is not None:
                groups.setdefault((tool_of(rec), rec.scenario, metric), []).append(v)
    rows = []
    for (tool, scenario, metric) in sorted(groups, key=_row_key):
        values = groups[(tool, scenario, metric)]
        kept, removed = iqr_filter(values)
        mu = math.fsum(kept) / len(kept) if kept else None
        rows.append(SummaryRow(tool, scenario, metric, mu, sample_sigma(kept), len(kept), len(removed)))
    return rows


def _row_key(key):
    tool, scenario, metric = key
    return (SCENARIO_ORDER.index(scenario) if scenario in SCENARIO_ORDER else 99, tool,
            TABLE_COLUMNS.index(metric) if metric in TABLE_COLUMNS else 99)


def _cell(mu, sigma) -> str:
    if mu is None:
        return "-"
    if sigma is None:
        return f"{mu:.4g}"
    return f"{mu:.4g} ({sigma:.3g})"


def render_table(rows: Sequence[SummaryRow], preset: str = "", failures: int = 0) -> str:
    """Aligned text table: one line per (tool, scenario), one column per metric, cells ``mu (sigma)``."""
    header = [f"# {QUARTILE_NOTE}; values standardised per unit (divided by k)"]
    if preset:
        header.append(f"# preset: {preset}")
    header.append(f"# failed iterations excluded: {failures}")
    cells: dict = {}
    for r in rows:
        cells.setdefault((r.scenario, r.tool), {})[r.metric] = _cell(r.mu, r.sigma)
    if not cells:
        return "\n".join(header + ["(no data)"]) + "\n"
    scenarios = sorted({s for s, _ in cells}, key=lambda s: SCENARIO_ORDER.index(s) if s in SCENARIO_ORDER else 99)
    cols = [c for c in TABLE_COLUMNS if any(c in SCENARIO_METRICS.get(s, ()) for s in scenarios)]
    table = [["scenario", "tool"] + cols]
    for s in scenarios:
        for tool in sorted(t for sc, t in cells if sc == s):
            row = cells[(s, tool)]
            table.append([s, tool] + [row.get(c, "-") for c in cols])
    widths = [max(len(line[i]) for line in table) for i in range(len(table[0]))]
    lines = ["  ".join(v.ljust(w) for v, w in zip(line, widths)).rstrip() for line in table]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(header + lines) + "\n"


__all__ = [
    "QUARTILE_NOTE",
    "SCENARIO_METRICS",
    "SummaryRow",
    "iqr_filter",
    "median",
    "median_trend",
    "quartiles",
    "render_table",
    "sample_sigma",
    "summarize",
]
