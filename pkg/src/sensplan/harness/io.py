"""Plain file formats: traces, tables, covariance snapshots and particle snapshots."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..gauss_info import JointGaussian, VariableSet
from ..tracking import ParticleSet

COV_MAGIC = b"SPCOV1\n"


def fmt(x: float) -> str:
    """Round-trip float text; NaN is written as N/A."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "N/A"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([c if isinstance(c, str) else fmt(c) for c in row])
    path.write_text(buf.getvalue())


def read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_trace(path: Path, rows: Iterable[tuple[int, float, Sequence[int] | str]]) -> None:
    """Per-stage trace: stage, objective, profile as semicolon-joined indices."""
    out = []
    for stage, value, profile in rows:
        prof = profile if isinstance(profile, str) else ";".join(str(int(a)) for a in profile)
        out.append((str(stage), fmt(value), prof))
    write_csv(path, ("stage", "objective", "profile"), out)


def aligned_text(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    cols = [list(header)] + [list(r) for r in rows]
    widths = [max(len(r[k]) for r in cols) for k in range(len(header))]
    lines = []
    for n, r in enumerate(cols):
        lines.append("  ".join(c.ljust(w) if k == 0 else c.rjust(w) for k, (c, w) in enumerate(zip(r, widths))).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def export_covariance(jg: JointGaussian, path: Path) -> Path:
    """Dense float64 matrix behind a small JSON header, plus a text label index next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = len(jg.vars)
    header = json.dumps({"n": n, "dtype": "<f8", "order": "C"}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(COV_MAGIC)
        fh.write(len(header).to_bytes(4, "little"))
        fh.write(header)
        fh.write(np.ascontiguousarray(jg.cov, dtype="<f8").tobytes())
    index = path.with_suffix(".labels.txt")
    index.write_text("".join(f"{k}\t{lab}\t{kind}\n" for k, (lab, kind) in enumerate(zip(jg.vars.labels, jg.vars.kinds))))
    return index


def import_covariance(path: Path) -> JointGaussian:
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(len(COV_MAGIC)) != COV_MAGIC:
            raise ValueError(f"{path} is not a covariance snapshot")
        size = int.from_bytes(fh.read(4), "little")
        header = json.loads(fh.read(size))
        n = header["n"]
        cov = np.frombuffer(fh.read(8 * n * n), dtype="<f8").reshape(n, n)
    labels, kinds = [], []
    for line in path.with_suffix(".labels.txt").read_text().splitlines():
        _, lab, kind = line.split("\t")
        labels.append(lab)
        kinds.append(kind)
    return JointGaussian(VariableSet(tuple(labels), tuple(kinds)), cov.copy())


def export_particles(ps: ParticleSet, path: Path) -> None:
    """One particle per line: weight, target count, then the present targets' [x y vx vy]."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# weight count states..."]
    for w, c, flat in ps.to_rows():
        lines.append(" ".join([fmt(w), str(c)] + [fmt(v) for v in flat]))
    path.write_text("\n".join(lines) + "\n")


def import_particles(path: Path, max_targets: int | None = None) -> ParticleSet:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    counts = np.array([int(r[1]) for r in rows])
    t = int(counts.max()) if max_targets is None else max_targets
    states = np.zeros((len(rows), t, 4))
    for k, r in enumerate(rows):
        vals = np.array([float(v) for v in r[2:]]).reshape(-1, 4)
        states[k, : len(vals)] = vals
    weights = np.array([float(r[0]) for r in rows])
    return ParticleSet(weights / weights.sum(), states, counts)
