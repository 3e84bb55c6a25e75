"""Multi-target tracking scenario with binary range-dependent detection sensors.

Targets are represented by a JMPD-style particle set: every particle carries
a full multi-target hypothesis.  Detections at distinct sensing points are
conditionally independent given a hypothesis, so the outcome distribution of
k points is a weighted mixture of products of Bernoullis and every entropy
below is an exact sum over the 2^k outcomes.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import xlogy

from .errors import Degeneracy, OutcomeSpaceTooLarge
from .game import SensorGame

OUTCOME_GUARD = 20


@dataclass(frozen=True)
class DetectionSensor:
    p_d0: float = 0.9
    r0: float = 600.0
    p_fa: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.p_d0 <= 1.0:
            raise ValueError("peak detection probability must lie in (0, 1]")
        if self.r0 <= 0:
            raise ValueError("range constant must be positive")
        if not 0.0 <= self.p_fa < 1.0:
            raise ValueError("false-alarm rate must lie in [0, 1)")


@dataclass
class ParticleSet:
    """Weighted multi-target hypotheses.

    ``states`` has shape (n_particles, max_targets, 4) holding
    [x, y, vx, vy] in meters and m/s; only the first ``counts[p]`` targets of
    particle p are present.
    """

    weights: np.ndarray
    states: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        self.counts = np.asarray(self.counts, dtype=int)
        n = self.weights.shape[0]
        if self.states.ndim != 3 or self.states.shape[0] != n or self.states.shape[2] != 4:
            raise ValueError("states must have shape (n_particles, max_targets, 4)")
        if self.counts.shape != (n,) or np.any(self.counts < 0) or np.any(self.counts > self.states.shape[1]):
            raise ValueError("target counts out of range")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to one")

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def present(self) -> np.ndarray:
        """Boolean mask (n_particles, max_targets) of targets that exist."""
        return np.arange(self.states.shape[1])[None, :] < self.counts[:, None]

    def ess(self) -> float:
        return 1.0 / float(np.sum(self.weights**2))

    def copy(self) -> "ParticleSet":
        return ParticleSet(self.weights.copy(), self.states.copy(), self.counts.copy())

    def to_rows(self):
        """(weight, count, flattened present states) per particle, for plain-text export."""
        mask = self.present()
        for w, c, s, m in zip(self.weights, self.counts, self.states, mask):
            yield float(w), int(c), s[m].reshape(-1).tolist()


def detection_prob(points: np.ndarray, ps: ParticleSet, sensor: DetectionSensor) -> np.ndarray:
    """Detection probability at each point for each hypothesis, shape (n_particles, n_points).

    The nearest present target sets the range r; p = P_d0 exp(-r / R_0) is
    combined with false alarms as 1 - (1 - p)(1 - P_f).  A hypothesis with no
    targets gives P_f.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    pos = ps.states[:, :, :2]
    diff = pos[:, :, None, :] - points[None, None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=-1))
    dist = np.where(ps.present()[:, :, None], dist, np.inf)
    r = dist.min(axis=1)
    p = sensor.p_d0 * np.exp(-r / sensor.r0)
    return 1.0 - (1.0 - p) * (1.0 - sensor.p_fa)


def outcome_likelihoods(probs: np.ndarray) -> np.ndarray:
    """p(z | hypothesis) for every outcome vector of the columns of `probs`.

    Returns shape (n_particles, 2^k); bit j of the outcome index is the
    detection at column j.
    """
    probs = np.atleast_2d(probs)
    lik = np.ones((probs.shape[0], 1))
    for j in range(probs.shape[1]):
        p = probs[:, j : j + 1]
        # new bit j is the most significant so far
        lik = np.concatenate([lik * (1.0 - p), lik * p], axis=1)
    return lik


def _entropy_of(q: np.ndarray) -> float:
    return float(-np.sum(xlogy(q, q)))


def _binary_entropy(p: np.ndarray) -> np.ndarray:
    return -(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p))


def _check_size(k: int, guard: int) -> None:
    if k > guard:
        raise OutcomeSpaceTooLarge(f"2^{k} outcomes exceed the enumeration guard 2^{guard}")


def mc_entropy(probs: np.ndarray, weights: np.ndarray, guard: int = OUTCOME_GUARD) -> float:
    """H(z_s) of the particle mixture; `probs` is (n_particles, |s|)."""
    probs = np.atleast_2d(probs)
    k = probs.shape[1]
    _check_size(k, guard)
    if k == 0:
        return 0.0
    h = k // 2
    left = outcome_likelihoods(probs[:, :h]) * weights[:, None]
    right = outcome_likelihoods(probs[:, h:])
    return _entropy_of(left.T @ right)


def mc_cond_entropy(probs: np.ndarray, weights: np.ndarray, guard: int = OUTCOME_GUARD,
                    enumerate_outcomes: bool = False) -> float:
    """H(z_s | x_t): weighted average over hypotheses of the outcome entropy.

    Given a hypothesis the detections are independent, so the per-hypothesis
    entropy is a sum of binary entropies; ``enumerate_outcomes=True`` sums over
    all 2^k outcomes instead.
    """
    probs = np.atleast_2d(probs)
    _check_size(probs.shape[1], guard)
    if enumerate_outcomes:
        lik = outcome_likelihoods(probs)
        return float(-np.sum(weights[:, None] * xlogy(lik, lik)))
    return float(weights @ _binary_entropy(probs).sum(axis=1))


class ParticleEngine:
    """Information engine over a fixed particle set and candidate sensing points.

    Selections are index multisets into `points`; a repeated index is an
    independent repeated detection attempt.
    """

    def __init__(self, ps: ParticleSet, points: np.ndarray, sensor: DetectionSensor,
                 guard: int = OUTCOME_GUARD, cache_size: int = 4096):
        self.ps = ps
        self.points = np.asarray(points, dtype=float)
        self.sensor = sensor
        self.guard = guard
        self.weights = ps.weights.copy()
        self.probs = detection_prob(self.points, ps, sensor)
        self._hbin = _binary_entropy(self.probs)
        self._lik = lru_cache(maxsize=256)(self._lik_uncached)
        self._entropy = lru_cache(maxsize=cache_size)(self._entropy_uncached)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def cache_clear(self) -> None:
        self._lik.cache_clear()
        self._entropy.cache_clear()

    def _lik_uncached(self, idx: tuple[int, ...]) -> np.ndarray:
        lik = outcome_likelihoods(self.probs[:, list(idx)])
        lik.setflags(write=False)
        return lik

    def _entropy_uncached(self, left: tuple[int, ...], right: tuple[int, ...]) -> float:
        _check_size(len(left) + len(right), self.guard)
        if not left and not right:
            return 0.0
        q = (self._lik(left) * self.weights[:, None]).T @ self._lik(right)
        return _entropy_of(q)

    @staticmethod
    def _key(idx) -> tuple[int, ...]:
        return tuple(sorted(int(k) for k in idx))

    def entropy(self, idx: Sequence[int]) -> float:
        """H(z_idx)."""
        key = self._key(idx)
        h = len(key) // 2
        return self._entropy(key[:h], key[h:])

    def cond_entropy(self, idx: Sequence[int]) -> float:
        """H(z_idx | x_t)."""
        idx = list(idx)
        _check_size(len(idx), self.guard)
        return float(self.weights @ self._hbin[:, idx].sum(axis=1)) if idx else 0.0

    def _joint_entropy(self, a: Sequence[int], c: Sequence[int]) -> float:
        ka, kc = self._key(a), self._key(c)
        if not kc:
            return self.entropy(ka)
        return self._entropy(ka, kc)

    def mi(self, a: Sequence[int], c: Sequence[int] = ()) -> float:
        """I(x_t; z_a | z_c) over the enumerated outcome space."""
        a, c = tuple(a), tuple(c)
        if not a:
            return 0.0
        joint = self._joint_entropy(a, c) - self.cond_entropy(a + c)
        base = self.entropy(c) - self.cond_entropy(c) if c else 0.0
        return joint - base

    def zz_mi(self, a: Sequence[int], b: Sequence[int], c: Sequence[int] = (),
              given_target: bool = False) -> float:
        """I(z_a; z_b | z_c [, x_t])."""
        a, b, c = tuple(a), tuple(b), tuple(c)
        if not a or not b:
            return 0.0
        if given_target:
            h = self.cond_entropy
        else:
            h = self.entropy
        return h(a + c) + h(b + c) - h(a + b + c) - (h(c) if c else 0.0)

    def z_covariances(self) -> tuple[np.ndarray, np.ndarray]:
        """Second-moment surrogate (Cov(z), E[Cov(z | x_t)]) of the detection outcomes.

        Used only to drive the correlation-based neighbor selection.
        """
        w, p = self.weights, self.probs
        mean = w @ p
        second = (p * w[:, None]).T @ p
        second[np.diag_indices_from(second)] = mean
        prior = second - np.outer(mean, mean)
        post = np.diag(w @ (p * (1.0 - p)))
        floor = 1e-9
        prior[np.diag_indices_from(prior)] += floor
        post[np.diag_indices_from(post)] += floor
        return 0.5 * (prior + prior.T), post


def particle_utility(engine: ParticleEngine, action: Sequence[int], cond: Sequence[int] = ()) -> float:
    """I(x_t; z_action | z_cond) = H(z_{a+c}) - H(z_{a+c}|x_t) - [H(z_c) - H(z_c|x_t)]."""
    return engine.mi(action, cond)


def jmpd_step(
    ps: ParticleSet,
    rng: np.random.Generator,
    dt: float = 10.0,
    accel_sd: float = 1.0,
    points: np.ndarray | None = None,
    detections: np.ndarray | None = None,
    sensor: DetectionSensor | None = None,
    resample_threshold: float = 0.5,
) -> ParticleSet:
    """Propagate, reweight by binary detections, and resample when ESS falls too low.

    Motion is nearly constant velocity with white acceleration noise of
    standard deviation `accel_sd` (m/s^2).  All randomness comes from `rng`,
    so agents sharing a seed reproduce the same particle set.
    """
    out = ps.copy()
    n, t = out.states.shape[:2]
    if accel_sd > 0:
        acc = accel_sd * rng.standard_normal((n, t, 2))
    else:
        acc = np.zeros((n, t, 2))
    out.states[:, :, :2] += out.states[:, :, 2:] * dt + 0.5 * acc * dt**2
    out.states[:, :, 2:] += acc * dt
    if detections is None or len(detections) == 0:
        return out
    if sensor is None or points is None:
        raise ValueError("points and sensor are required to weigh detections")
    p = detection_prob(points, out, sensor)
    z = np.asarray(detections, dtype=float)
    lik = np.prod(np.where(z[None, :] > 0.5, p, 1.0 - p), axis=1)
    w = out.weights * lik
    total = w.sum()
    if not total > 0 or not np.isfinite(total):
        warnings.warn("all particle weights underflowed; resetting to uniform", Degeneracy)
        w = np.full(n, 1.0 / n)
    else:
        w = w / total
    out.weights = w
    if out.ess() < resample_threshold * n:
        idx = systematic_resample(w, rng)
        out = ParticleSet(np.full(n, 1.0 / n), out.states[idx], out.counts[idx])
    return out


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = weights.shape[0]
    positions = (rng.random() + np.arange(n)) / n
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, positions)


@dataclass(frozen=True)
class TrackingCase:
    case_id: int
    agents_x: int
    agents_y: int
    cells_x: int
    cells_y: int


TRACKING_CASES = {
    1: TrackingCase(1, agents_x=3, agents_y=2, cells_x=2, cells_y=3),
    2: TrackingCase(2, agents_x=6, agents_y=1, cells_x=1, cells_y=6),
}


@dataclass(frozen=True)
class TrackingConfig:
    region: float = 2400.0
    cell: float = 400.0
    points_per_action: int = 2
    n_particles: int = 500
    n_targets: int = 2
    p_d0: float = 0.9
    r0: float = 600.0
    p_fa: float = 0.05
    dt: float = 10.0
    accel_sd: float = 0.5
    prior_pos_sd: float = 600.0
    prior_vel_sd: float = 3.0
    target_speed: float = 5.0
    target_margin: float = 300.0

    @classmethod
    def from_dict(cls, d: dict | None) -> "TrackingConfig":
        return cls(**dict(d or {}))

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def sensor(self) -> DetectionSensor:
        return DetectionSensor(self.p_d0, self.r0, self.p_fa)


@dataclass
class TrackingScenario:
    config: TrackingConfig
    case: TrackingCase
    truth: np.ndarray
    particles: ParticleSet = field(repr=False)
    game: SensorGame = field(repr=False)
    agent_positions: list[tuple[int, int]]
    points: np.ndarray = field(repr=False)


def _case_layout(cfg: TrackingConfig, case: TrackingCase):
    """Sensing points (cell centers) grouped by agent; agents in row-major order."""
    points, groups, positions, centers = [], [], [], []
    for ay in range(case.agents_y):
        for ax in range(case.agents_x):
            group = []
            for cy in range(case.cells_y):
                for cx in range(case.cells_x):
                    gx = ax * case.cells_x + cx
                    gy = ay * case.cells_y + cy
                    group.append(len(points))
                    points.append(((gx + 0.5) * cfg.cell, (gy + 0.5) * cfg.cell))
            groups.append(group)
            positions.append((ax, ay))
            centers.append((
                (ax + 0.5) * case.cells_x * cfg.cell,
                (ay + 0.5) * case.cells_y * cfg.cell,
            ))
    return np.array(points), groups, positions, np.array(centers)


def tracking_scenario(config: TrackingConfig, case_id: int, seed: int) -> TrackingScenario:
    """Two targets, a broad particle prior and one JMPD update from the agents' own sensors."""
    cfg = config
    case = TRACKING_CASES[case_id]
    rng = np.random.default_rng(seed)
    lo, hi = cfg.target_margin, cfg.region - cfg.target_margin
    pos = rng.uniform(lo, hi, size=(cfg.n_targets, 2))
    heading = rng.uniform(0, 2 * np.pi, size=cfg.n_targets)
    vel = cfg.target_speed * np.stack([np.cos(heading), np.sin(heading)], axis=1)
    truth = np.hstack([pos, vel])

    n = cfg.n_particles
    states = np.empty((n, cfg.n_targets, 4))
    states[:, :, :2] = truth[None, :, :2] + cfg.prior_pos_sd * rng.standard_normal((n, cfg.n_targets, 2))
    states[:, :, :2] = np.clip(states[:, :, :2], 0.0, cfg.region)
    states[:, :, 2:] = truth[None, :, 2:] + cfg.prior_vel_sd * rng.standard_normal((n, cfg.n_targets, 2))
    prior = ParticleSet(np.full(n, 1.0 / n), states, np.full(n, cfg.n_targets))

    points, groups, positions, centers = _case_layout(cfg, case)
    sensor = cfg.sensor
    truth_next = truth.copy()
    truth_next[:, :2] += truth[:, 2:] * cfg.dt
    true_set = ParticleSet(np.ones(1), truth_next[None], np.array([cfg.n_targets]))
    p_true = detection_prob(centers, true_set, sensor)[0]
    detections = (rng.random(p_true.size) < p_true).astype(int)
    particles = jmpd_step(prior, rng, cfg.dt, cfg.accel_sd, centers, detections, sensor)

    engine = ParticleEngine(particles, points, sensor)
    action_sets = tuple(
        tuple(itertools.combinations_with_replacement(g, cfg.points_per_action)) for g in groups
    )
    game = SensorGame(engine, action_sets)
    return TrackingScenario(cfg, case, truth_next, particles, game, positions, points)
