"""Experiment orchestration: manifests, strategy runs, oracle, benchmarks and the CLI."""
from .bench import BenchReport, bench_utility
from .manifest import RunManifest, load_manifest
from .oracle import exhaustive_oracle
from .runner import CaseResult, RunOutput, StrategyResult, run_case, run_manifest

__all__ = [
    "BenchReport",
    "CaseResult",
    "RunManifest",
    "RunOutput",
    "StrategyResult",
    "bench_utility",
    "exhaustive_oracle",
    "load_manifest",
    "run_case",
    "run_manifest",
]
