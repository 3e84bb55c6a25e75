"""Utility-evaluation cost versus conditioning-set size."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..gauss_info import GaussianEngine
from ..tracking import DetectionSensor, ParticleEngine, ParticleSet


@dataclass
class BenchReport:
    engine: str
    sizes: list[int]
    seconds: list[float]
    slope: float | None = None
    ratios: list[float] = field(default_factory=list)

    @property
    def median_ratio(self) -> float | None:
        return float(np.median(self.ratios)) if self.ratios else None

    def to_dict(self) -> dict:
        return {
            "engine": self.engine,
            "sizes": self.sizes,
            "seconds": self.seconds,
            "loglog_slope": self.slope,
            "step_ratios": self.ratios,
            "median_step_ratio": self.median_ratio,
        }


def _median_time(fn, repeats: int, min_time: float) -> float:
    samples = []
    for _ in range(repeats):
        n, t0 = 0, time.perf_counter()
        while True:
            fn()
            n += 1
            dt = time.perf_counter() - t0
            if dt >= min_time:
                break
        samples.append(dt / n)
    return float(np.median(samples))


def bench_utility(engine, sizes, repeats: int = 5, min_time: float = 0.02) -> BenchReport:
    """Median time of one uncached I(x_t; z_a | z_c) evaluation per conditioning size.

    For a Gaussian engine `a` is one point and |c| = size.  For a particle
    engine the enumerated set a + c has `size` points.  Reports the log-log
    slope of time against size and the per-step time ratios.
    """
    sizes = [int(s) for s in sizes]
    if not sizes or any(s < 1 for s in sizes):
        raise ValueError("sizes must be a nonempty list of positive integers")
    need = max(sizes) + 1
    if engine.n_points < need:
        raise ValueError(f"engine has {engine.n_points} points, benchmark needs {need}")
    kind = "gaussian" if isinstance(engine, GaussianEngine) else "particle"
    seconds = []
    for s in sizes:
        if kind == "gaussian":
            a, c = (s,), tuple(range(s))
        else:
            a, c = (0,), tuple(range(1, s))

        def call(a=a, c=c):
            engine.cache_clear()
            engine.mi(a, c)

        seconds.append(_median_time(call, repeats, min_time))
    slope = None
    if len(sizes) > 1:
        slope = float(np.polyfit(np.log(sizes), np.log(seconds), 1)[0])
    ratios = [b / a for a, b in zip(seconds, seconds[1:])]
    return BenchReport(kind, sizes, seconds, slope, ratios)


def gaussian_bench_engine(n: int, seed: int = 0) -> GaussianEngine:
    """Random SPD prior with a rank-deficient target update, for timing only."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, 2 * n))
    prior = a @ a.T / (2 * n) + np.eye(n)
    b = rng.standard_normal((n, 3))
    post = prior - b @ b.T / (1.0 + 3.0 * n)
    return GaussianEngine(prior, post, 0.1, cache_size=0)


def particle_bench_engine(n_points: int, n_particles: int = 4000, seed: int = 0) -> ParticleEngine:
    rng = np.random.default_rng(seed)
    states = np.zeros((n_particles, 2, 4))
    states[:, :, :2] = rng.uniform(0, 2400, size=(n_particles, 2, 2))
    ps = ParticleSet(np.full(n_particles, 1.0 / n_particles), states, np.full(n_particles, 2))
    points = rng.uniform(0, 2400, size=(n_points, 2))
    return ParticleEngine(ps, points, DetectionSensor(), cache_size=1)
