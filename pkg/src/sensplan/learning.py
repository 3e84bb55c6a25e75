"""Decision protocols: local greedy, sequential greedy and joint strategy fictitious play."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .game import EQ_SLACK, NeighborMap, Profile, SensorGame

DEFAULT_MAX_STAGES = 50


def local_greedy(g: SensorGame) -> Profile:
    """Each player maximizes I(x_t; z_{s_i}) ignoring everyone else."""
    return tuple(
        int(np.argmax([g.engine.mi(a) for a in acts])) for acts in g.action_sets
    )


def sequential_greedy(g: SensorGame, order: Sequence[int] | None = None) -> Profile:
    """Players in `order` maximize I(x_t; z_{s_i} | z of the players before them)."""
    order = list(range(g.n_players)) if order is None else list(order)
    if sorted(order) != list(range(g.n_players)):
        raise ValueError(f"order {order} is not a permutation of the players")
    chosen: dict[int, int] = {}
    taken: tuple[int, ...] = ()
    for i in order:
        scores = [g.engine.mi(a, taken) for a in g.action_sets[i]]
        chosen[i] = int(np.argmax(scores))
        taken = taken + g.action_sets[i][chosen[i]]
    return tuple(chosen[i] for i in range(g.n_players))


@dataclass
class JsfpState:
    """Running averages U_i(s_i; t) of realized utilities, one array per player."""

    averages: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros(cls, sizes: Sequence[int]) -> "JsfpState":
        return cls([np.zeros(n) for n in sizes])

    def update(self, instant: Sequence[np.ndarray]) -> None:
        """Fold in U_i(., s_-i(t-1)) with the recursion avg <- (t-1)/t avg + u/t."""
        self.t += 1
        t = self.t
        for avg, u in zip(self.averages, instant):
            avg *= (t - 1) / t
            avg += np.asarray(u) / t


@dataclass
class LearningTrace:
    profiles: list[Profile]
    objectives: list[float]
    converged: bool
    stages: int
    deviation_gain: float = field(default=float("nan"))

    @property
    def final_profile(self) -> Profile:
        return self.profiles[-1]

    @property
    def final_objective(self) -> float:
        return self.objectives[-1]

    def rows(self):
        for t, (p, v) in enumerate(zip(self.profiles, self.objectives)):
            yield t, v, p


def _is_equilibrium(instant: Sequence[np.ndarray], p: Profile) -> tuple[bool, float]:
    gain = max(float(u.max() - u[a]) for u, a in zip(instant, p))
    return gain <= EQ_SLACK, gain


def jsfp(
    g: SensorGame,
    neighbors: NeighborMap | None = None,
    inertia: float = 1.0,
    max_stages: int = DEFAULT_MAX_STAGES,
    seed: int | None = 0,
    initial: Profile | None = None,
) -> LearningTrace:
    """Joint strategy fictitious play on `g` (approximate utilities when `neighbors` is given).

    Stage 0 is the local-greedy profile.  At stage t every player evaluates
    all its actions against the frozen stage t-1 opponents, folds them into
    its running average and picks the argmax (lowest index on ties).  A player
    whose argmax differs from its current action switches with probability
    `inertia`; ``inertia=1`` disables inertia.  The run stops once a profile
    has been held for two consecutive stages and is an equilibrium of the
    utilities in use, or when the trace holds `max_stages` profiles.
    """
    if not 0.0 <= inertia <= 1.0:
        raise ValueError("inertia must lie in [0, 1]")
    if max_stages < 1:
        raise ValueError("max_stages must be at least 1")
    gm = g.with_neighbors(neighbors) if neighbors is not None else g
    rng = np.random.default_rng(seed)
    profile = tuple(initial) if initial is not None else local_greedy(gm)
    profile = gm.check_profile(profile)
    state = JsfpState.zeros(gm.sizes)
    profiles, objectives = [profile], [gm.objective(profile)]
    converged, gain = False, float("nan")
    held = 1
    while len(profiles) < max_stages:
        instant = [gm.utilities(i, profile) for i in range(gm.n_players)]
        is_eq, gain = _is_equilibrium(instant, profile)
        if held >= 2 and is_eq:
            converged = True
            break
        state.update(instant)
        new = []
        for i, avg in enumerate(state.averages):
            best = int(np.argmax(avg))
            if best != profile[i] and inertia < 1.0 and rng.random() >= inertia:
                best = profile[i]
            new.append(best)
        new = tuple(new)
        held = held + 1 if new == profile else 1
        profile = new
        profiles.append(profile)
        objectives.append(gm.objective(profile))
    if not converged:
        instant = [gm.utilities(i, profile) for i in range(gm.n_players)]
        is_eq, gain = _is_equilibrium(instant, profile)
        converged = held >= 2 and is_eq
    return LearningTrace(profiles, objectives, converged, len(profiles) - 1, gain)
