"""Strategy comparison runs: scenario -> game -> strategies -> tables and traces."""
from __future__ import annotations

import json
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import TooLargeToEnumerate
from ..game import NeighborMap, SensorGame
from ..learning import LearningTrace, jsfp, local_greedy, sequential_greedy
from ..lorenz import build_joint, weather_scenario
from ..neighbor import CommGraph, correlation_neighbor_map, geometry_neighbors
from ..tracking import tracking_scenario
from .io import aligned_text, export_covariance, export_particles, fmt, write_csv, write_trace
from .manifest import RunManifest
from .oracle import exhaustive_oracle

WORKERS_ENV = "SENSPLAN_WORKERS"


@dataclass
class StrategyResult:
    """Final objective (mean over inertia seeds where relevant) and its traces."""

    name: str
    objective: float
    stages: float
    traces: list[list[tuple[int, float, tuple[int, ...]]]]
    seconds: float = 0.0

    def mean_trace(self) -> list[tuple[int, float, str]]:
        """Stage-wise mean over traces, each held at its final value once it stops."""
        if len(self.traces) == 1:
            return list(self.traces[0])
        length = max(len(t) for t in self.traces)
        vals = np.array([[r[1] for r in t] + [t[-1][1]] * (length - len(t)) for t in self.traces])
        return [(k, float(v), "mean") for k, v in enumerate(vals.mean(axis=0))]


@dataclass
class CaseResult:
    case_id: int
    seed: int
    results: dict[str, StrategyResult] = field(default_factory=dict)
    neighbors: dict[str, NeighborMap] = field(default_factory=dict)
    scenario: object = field(default=None, repr=False)

    def objective(self, name: str) -> float:
        return self.results[name].objective


def _trace_rows(tr: LearningTrace):
    return [(t, v, p) for t, v, p in tr.rows()]


def _single(name: str, g: SensorGame, profile, seconds: float) -> StrategyResult:
    v = g.objective(profile)
    return StrategyResult(name, v, 0.0, [[(0, v, tuple(profile))]], seconds)


def _learning(name: str, g: SensorGame, m: RunManifest, nm: NeighborMap | None,
              inertia: float, seeds) -> StrategyResult:
    t0 = time.perf_counter()
    traces = [jsfp(g, nm, inertia=inertia, max_stages=m.max_stages, seed=s) for s in seeds]
    # approximate runs are scored on the true objective
    res = StrategyResult(
        name,
        float("nan"),
        float(np.mean([tr.stages for tr in traces])),
        [_trace_rows(tr) for tr in traces],
        time.perf_counter() - t0,
    )
    # the table cell is read off the written trace so the two always agree
    res.objective = res.mean_trace()[-1][1]
    return res


def build_scenario(m: RunManifest, case_id: int, seed: int, joint=None):
    cfg = m.scenario_config()
    if m.scenario == "weather":
        return weather_scenario(cfg, case_id, seed, joint)
    return tracking_scenario(cfg, case_id, seed)


def neighbor_maps(m: RunManifest, scenario) -> dict[str, NeighborMap]:
    g = scenario.game
    graph = CommGraph.grid(scenario.agent_positions)
    return {
        m.khop_name: geometry_neighbors(graph, m.hops),
        "jsfp-approx-corr": correlation_neighbor_map(
            g, m.corr_budget, condition_on_own=m.corr_condition_on_own,
            budget_unit=m.corr_budget_unit,
        ),
    }


def run_case(m: RunManifest, case_id: int, seed: int, joint=None) -> CaseResult:
    """Run every manifest strategy on one (case, scenario seed)."""
    sc = build_scenario(m, case_id, seed, joint)
    g = sc.game
    out = CaseResult(case_id, seed, scenario=sc)
    maps = neighbor_maps(m, sc) if any(s.startswith("jsfp-approx") for s in m.strategies) else {}
    out.neighbors = maps
    inertia_seeds = [seed * 1000 + k for k in range(m.inertia_seeds)]
    for name in m.strategies:
        label = m.strategy_label(name)
        t0 = time.perf_counter()
        if name == "local-greedy":
            res = _single(label, g, local_greedy(g), 0.0)
        elif name == "sequential-greedy":
            res = _single(label, g, sequential_greedy(g), 0.0)
        elif name == "jsfp-full":
            res = _learning(label, g, m, None, 1.0, [seed])
        elif name == "jsfp-full-inertia":
            res = _learning(label, g, m, None, m.inertia, inertia_seeds)
        elif name in ("jsfp-approx-khop", "jsfp-approx-corr"):
            res = _learning(label, g, m, maps[label], m.inertia, inertia_seeds)
        elif name == "oracle":
            try:
                profile, _ = exhaustive_oracle(g, m.oracle_limit)
                res = _single(label, g, profile, 0.0)
            except TooLargeToEnumerate:
                res = StrategyResult(label, float("nan"), float("nan"), [], 0.0)
        else:  # pragma: no cover - manifest validation rejects this
            raise ValueError(name)
        res.seconds = time.perf_counter() - t0
        out.results[label] = res
    return out


def _run_seed(m: RunManifest, seed: int, root: Path) -> list[CaseResult]:
    joint = None
    if m.scenario == "weather":
        joint = build_joint(m.scenario_config(), seed)
    cases = [run_case(m, c, seed, joint) for c in m.cases]
    write_seed_outputs(m, seed, cases, root)
    for c in cases:
        # scenarios hold memoized engines; keep results light for the parent process
        c.scenario = None
    return cases


def write_seed_outputs(m: RunManifest, seed: int, cases: list[CaseResult], root: Path) -> Path:
    d = root / f"seed_{seed}"
    labels = list(cases[0].results)
    header = ["strategy"]
    for c in cases:
        header += [f"case{c.case_id}_objective", f"case{c.case_id}_stages"]
    rows = []
    for lab in labels:
        row = [lab]
        for c in cases:
            r = c.results[lab]
            row += [fmt(r.objective), fmt(r.stages)]
        rows.append(row)
    write_csv(d / "table.csv", header, rows)
    (d / "table.txt").write_text(aligned_text(header, rows))
    timing = {}
    for c in cases:
        for lab, r in c.results.items():
            if r.traces:
                write_trace(d / "traces" / f"case{c.case_id}" / f"{lab}.csv", r.mean_trace())
                if len(r.traces) > 1:
                    for k, tr in enumerate(r.traces):
                        write_trace(d / "traces" / f"case{c.case_id}" / lab / f"run{k:02d}.csv", tr)
            timing[f"case{c.case_id}/{lab}"] = round(r.seconds, 6)
        if c.neighbors:
            nb = {name: nm.to_lists() for name, nm in c.neighbors.items()}
            (d / f"neighbors_case{c.case_id}.json").write_text(json.dumps(nb, sort_keys=True) + "\n")
        if c.scenario is not None and m.scenario == "tracking":
            export_particles(c.scenario.particles, d / f"particles_case{c.case_id}.txt")
    if cases and cases[0].scenario is not None and m.scenario == "weather":
        export_covariance(cases[0].scenario.joint, d / "covariance.bin")
    # wall time varies run to run, so it lives outside the byte-stable CSVs
    (root / "timing").mkdir(parents=True, exist_ok=True)
    (root / "timing" / f"seed_{seed}.json").write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n")
    return d


def summarize(all_cases: dict[int, list[CaseResult]]) -> tuple[list[str], list[list[str]]]:
    seeds = sorted(all_cases)
    first = all_cases[seeds[0]]
    header = ["strategy"] + [f"case{c.case_id}_median" for c in first] + [f"case{c.case_id}_mean" for c in first]
    rows = []
    for lab in first[0].results:
        med, mean = [], []
        for k in range(len(first)):
            vals = [all_cases[s][k].results[lab].objective for s in seeds]
            vals = [v for v in vals if not np.isnan(v)]
            med.append(fmt(statistics.median(vals)) if vals else "N/A")
            mean.append(fmt(float(np.mean(vals))) if vals else "N/A")
        rows.append([lab] + med + mean)
    return header, rows


@dataclass
class RunOutput:
    manifest: RunManifest
    out_dir: Path
    cases: dict[int, list[CaseResult]]

    def objectives(self, case_id: int, label: str) -> list[float]:
        idx = self.manifest.cases.index(case_id)
        return [self.cases[s][idx].objective(label) for s in sorted(self.cases)]


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def run_manifest(m: RunManifest, out_dir: str | Path | None = None, workers: int | None = None) -> RunOutput:
    """Run every seed of the manifest and write per-seed tables, traces and a summary."""
    root = Path(out_dir if out_dir is not None else m.out_dir)
    root.mkdir(parents=True, exist_ok=True)
    (root / "manifest.json").write_text(m.dumps())
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(m.seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_seed, [m] * len(m.seeds), m.seeds, [root] * len(m.seeds)))
    else:
        results = [_run_seed(m, s, root) for s in m.seeds]
    cases = dict(zip(m.seeds, results))
    header, rows = summarize(cases)
    write_csv(root / "summary.csv", header, rows)
    (root / "summary.txt").write_text(aligned_text(header, rows))
    return RunOutput(m, root, cases)
