"""Quick invariant sweeps usable without a test runner."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..game import NeighborMap, SensorGame, theorem1_check
from ..gauss_info import GaussianEngine
from ..neighbor import default_corr_budget, correlation_neighbor_map
from ..tracking import DetectionSensor, ParticleEngine, ParticleSet, outcome_likelihoods
from .oracle import exhaustive_oracle


@dataclass
class Check:
    name: str
    ok: bool
    worst: float
    detail: str = ""


def random_engine(rng: np.random.Generator, n_points: int, n_targets: int = 2,
                  noise: float = 0.1) -> GaussianEngine:
    """Gaussian engine from a random SPD joint over n_points sensing and n_targets target variables."""
    d = n_points + n_targets
    a = rng.standard_normal((d, d + 2))
    joint = a @ a.T / (d + 2) + 0.05 * np.eye(d)
    s, t = slice(0, n_points), slice(n_points, d)
    prior = joint[s, s]
    post = prior - joint[s, t] @ np.linalg.solve(joint[t, t], joint[t, s])
    return GaussianEngine(prior, post, noise)


def random_game(rng: np.random.Generator, n_players: int, max_actions: int = 4,
                points_per_action: int = 1) -> SensorGame:
    sizes = rng.integers(2, max_actions + 1, size=n_players)
    groups, k = [], 0
    for n in sizes:
        groups.append(list(range(k, k + n + points_per_action - 1)))
        k += n + points_per_action - 1
    eng = random_engine(rng, k)
    acts = tuple(
        tuple(tuple(grp[j : j + points_per_action]) for j in range(n)) for grp, n in zip(groups, sizes)
    )
    return SensorGame(eng, acts)


def check_gaussian_identities(n: int = 20, seed: int = 0) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        e = random_engine(rng, int(rng.integers(4, 12)))
        idx = rng.permutation(e.n_points)
        a, b, c = tuple(idx[:2]), tuple(idx[2:3]), tuple(idx[3:5])
        chain = e.mi(a + b, c) - e.mi(a, c) - e.mi(b, a + c)
        worst = max(worst, abs(chain), -min(0.0, e.mi(a, c)))
    return Check("gaussian chain rule and nonnegativity", worst <= 1e-9, worst)


def check_alignment(n: int = 10, seed: int = 1) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        g = random_game(rng, int(rng.integers(2, 5)))
        for p in g.profiles():
            for i in range(g.n_players):
                for a in range(g.sizes[i]):
                    q = p[:i] + (a,) + p[i + 1 :]
                    du = g.utility(i, q) - g.utility(i, p)
                    worst = max(worst, abs(du - (g.objective(q) - g.objective(p))))
    return Check("potential alignment of full utilities", worst <= 1e-9, worst)


def check_equilibria(n: int = 5, seed: int = 2) -> Check:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n):
        g = random_game(rng, 3)
        profile, _ = exhaustive_oracle(g)
        for nm in (NeighborMap.empty(g.n_players),
                   correlation_neighbor_map(g, default_corr_budget(g.n_players))):
            bad += len(theorem1_check(g, nm).violations)
        bad += int(any(g.utilities(i, profile).max() > g.utility(i, profile) + 1e-12 for i in range(g.n_players)))
    return Check("oracle is Nash; theorem bound holds", bad == 0, float(bad))


def check_particles(n: int = 10, seed: int = 3) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        n_p = int(rng.integers(5, 40))
        states = np.zeros((n_p, 2, 4))
        states[:, :, :2] = rng.uniform(0, 2400, size=(n_p, 2, 2))
        w = rng.random(n_p)
        ps = ParticleSet(w / w.sum(), states, rng.integers(0, 3, size=n_p))
        k = int(rng.integers(1, 9))
        eng = ParticleEngine(ps, rng.uniform(0, 2400, size=(k, 2)), DetectionSensor())
        total = float((ps.weights @ outcome_likelihoods(eng.probs)).sum())
        worst = max(worst, abs(total - 1.0), -min(0.0, eng.mi(tuple(range(k)))))
    return Check("particle outcome normalization and MI sign", worst <= 1e-12, worst)


SUITES = (check_gaussian_identities, check_alignment, check_equilibria, check_particles)


def run_selftest() -> list[Check]:
    return [fn() for fn in SUITES]
