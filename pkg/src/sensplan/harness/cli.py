"""Command-line entry point: run / oracle / neighbors / bench / selftest."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..errors import SensplanError
from .manifest import STRATEGIES, RunManifest, load_manifest


def _csv_list(text: str) -> list[str]:
    return [t for t in text.split(",") if t]


def _scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", type=Path, help="manifest supplying scenario constants")
    p.add_argument("--scenario", choices=("weather", "tracking"), default="weather")
    p.add_argument("--case", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sensplan", description=__doc__)
    sub = ap.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="run a manifest and write tables and traces")
    run.add_argument("manifest", type=Path)
    run.add_argument("--seed", type=int, action="append", help="override scenario seeds (repeatable)")
    run.add_argument("--out-dir", type=Path)
    run.add_argument("--strategies", type=_csv_list, help=f"comma list from {','.join(STRATEGIES)}")
    run.add_argument("--case", type=int, action="append", help="override cases (repeatable)")

    orc = sub.add_parser("oracle", help="exhaustive search of one case")
    _scenario_args(orc)
    orc.add_argument("--limit", type=int)

    nb = sub.add_parser("neighbors", help="dump k-hop and correlation neighbor maps")
    _scenario_args(nb)
    nb.add_argument("--out-dir", type=Path)

    bench = sub.add_parser("bench", help="time utility evaluation against conditioning size")
    bench.add_argument("--engine", choices=("gaussian", "particle", "both"), default="both")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out-dir", type=Path)

    sub.add_parser("selftest", help="run the built-in invariant sweeps")
    return ap


def _manifest_for(args) -> RunManifest:
    if getattr(args, "manifest", None):
        m = load_manifest(args.manifest)
        d = m.to_dict()
        d.update(cases=[args.case], seeds=[args.seed])
        return RunManifest.from_dict(d)
    return RunManifest(scenario=args.scenario, cases=[args.case], seeds=[args.seed])


def _emit(obj, out_dir: Path | None, name: str) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / name).write_text(text)
    sys.stdout.write(text)


def cmd_run(args) -> int:
    from .runner import run_manifest

    m = load_manifest(args.manifest)
    d = m.to_dict()
    if args.seed:
        d["seeds"] = args.seed
    if args.case:
        d["cases"] = args.case
    if args.strategies:
        d["strategies"] = args.strategies
    m = RunManifest.from_dict(d)
    out = run_manifest(m, args.out_dir)
    sys.stdout.write((out.out_dir / "summary.txt").read_text())
    return 0


def cmd_oracle(args) -> int:
    from .oracle import exhaustive_oracle
    from .runner import build_scenario

    m = _manifest_for(args)
    g = build_scenario(m, args.case, args.seed).game
    profile, value = exhaustive_oracle(g, args.limit or m.oracle_limit)
    _emit({"case": args.case, "seed": args.seed, "profile": list(profile), "objective": value}, None, "")
    return 0


def cmd_neighbors(args) -> int:
    from .runner import build_scenario, neighbor_maps

    m = _manifest_for(args)
    sc = build_scenario(m, args.case, args.seed)
    maps = {k: v.to_lists() for k, v in neighbor_maps(m, sc).items()}
    _emit({"case": args.case, "seed": args.seed, "neighbors": maps}, args.out_dir, "neighbors.json")
    return 0


def cmd_bench(args) -> int:
    from .bench import bench_utility, gaussian_bench_engine, particle_bench_engine

    reports = {}
    if args.engine in ("gaussian", "both"):
        reports["gaussian"] = bench_utility(gaussian_bench_engine(257, args.seed), [32, 64, 128, 256]).to_dict()
    if args.engine in ("particle", "both"):
        reports["particle"] = bench_utility(particle_bench_engine(13, seed=args.seed), range(8, 13)).to_dict()
    _emit(reports, args.out_dir, "bench.json")
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    checks = run_selftest()
    for c in checks:
        sys.stdout.write(json.dumps({"check": c.name, "ok": c.ok, "worst": c.worst}) + "\n")
    return 0 if all(c.ok for c in checks) else 1


COMMANDS = {
    "run": cmd_run,
    "oracle": cmd_oracle,
    "neighbors": cmd_neighbors,
    "bench": cmd_bench,
    "selftest": cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.verb](args)
    except (SensplanError, ValueError, OSError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
