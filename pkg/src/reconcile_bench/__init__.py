"""Deterministic simulator and benchmark harness for GitOps reconcilers."""

from .harness import ExperimentParams, KpiRecord, aggregate, generate_manifests, run_scenario
from .presets import load_preset
from .stats import iqr_filter, median_trend, sample_sigma, summarize

__version__ = "0.1.0"

__all__ = [
    "ExperimentParams",
    "KpiRecord",
    "aggregate",
    "generate_manifests",
    "iqr_filter",
    "load_preset",
    "median_trend",
    "run_scenario",
    "sample_sigma",
    "summarize",
]
