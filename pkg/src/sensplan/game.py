"""Sensor-selection games: utilities, potential, equilibria and approximation error.

A game pairs an information engine with per-player action sets.  An action is
a tuple of sensing-point indices understood by the engine; a profile is one
action index per player.  The engine must provide

``mi(a, c)``
    I(x_t; z_a | z_c) for index selections ``a`` and ``c``;
``zz_mi(a, b, c=(), given_target=False)``
    I(z_a; z_b | z_c [, x_t]).

Both :class:`sensplan.gauss_info.GaussianEngine` and
:class:`sensplan.tracking.ParticleEngine` qualify.

The approximation-error constants that do not depend on player i's own action
are never computed; every check compares differences between two actions.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Iterator, Sequence

import numpy as np

from .errors import TooLargeToEnumerate

EQ_SLACK = 1e-12

Profile = tuple[int, ...]
Action = tuple[int, ...]


@dataclass(frozen=True)
class NeighborMap:
    """Per-player tuple of other players whose choices condition its utility."""

    sets: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        sets = tuple(tuple(int(j) for j in s) for s in self.sets)
        n = len(sets)
        for i, s in enumerate(sets):
            if i in s:
                raise ValueError(f"player {i} listed as its own neighbor")
            if len(set(s)) != len(s):
                raise ValueError(f"duplicate neighbors for player {i}: {s}")
            if any(j < 0 or j >= n for j in s):
                raise ValueError(f"neighbor index out of range for player {i}: {s}")
        object.__setattr__(self, "sets", sets)

    @classmethod
    def complete(cls, n: int) -> "NeighborMap":
        return cls(tuple(tuple(j for j in range(n) if j != i) for i in range(n)))

    @classmethod
    def empty(cls, n: int) -> "NeighborMap":
        return cls(tuple(() for _ in range(n)))

    def __getitem__(self, i: int) -> tuple[int, ...]:
        return self.sets[i]

    def __len__(self) -> int:
        return len(self.sets)

    def sizes(self) -> list[int]:
        return [len(s) for s in self.sets]

    def to_lists(self) -> list[list[int]]:
        return [list(s) for s in self.sets]


@dataclass(frozen=True)
class SensorGame:
    """Immutable game; ``neighbors=None`` means full-information utilities."""

    engine: Any = field(repr=False)
    action_sets: tuple[tuple[Action, ...], ...]
    neighbors: NeighborMap | None = None

    def __post_init__(self):
        sets = tuple(tuple(tuple(int(k) for k in a) for a in acts) for acts in self.action_sets)
        object.__setattr__(self, "action_sets", sets)
        regions = []
        for i, acts in enumerate(sets):
            if not acts:
                raise ValueError(f"player {i} has an empty action set")
            if any(len(a) == 0 for a in acts):
                raise ValueError(f"player {i} has an empty action")
            regions.append({k for a in acts for k in a})
        for i, j in itertools.combinations(range(len(sets)), 2):
            if regions[i] & regions[j]:
                raise ValueError(f"sensing regions of players {i} and {j} overlap")
        if self.neighbors is not None and len(self.neighbors) != len(sets):
            raise ValueError("neighbor map size does not match number of players")

    # --- structure -------------------------------------------------------

    @property
    def n_players(self) -> int:
        return len(self.action_sets)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.action_sets)

    @property
    def n_profiles(self) -> int:
        return math.prod(self.sizes)

    def region(self, i: int) -> tuple[int, ...]:
        """Every sensing point player i can choose, ascending."""
        return tuple(sorted({k for a in self.action_sets[i] for k in a}))

    def owner_of_points(self) -> dict[int, int]:
        return {k: i for i in range(self.n_players) for k in self.region(i)}

    def with_neighbors(self, nm: NeighborMap | None) -> "SensorGame":
        return SensorGame(self.engine, self.action_sets, nm)

    def full(self) -> "SensorGame":
        return self.with_neighbors(None)

    def profiles(self, limit: int | None = None) -> Iterator[Profile]:
        if limit is not None and self.n_profiles > limit:
            raise TooLargeToEnumerate(
                f"{self.n_profiles} profiles exceed the enumeration limit {limit}"
            )
        return itertools.product(*(range(n) for n in self.sizes))

    def check_profile(self, p: Sequence[int]) -> Profile:
        p = tuple(int(a) for a in p)
        if len(p) != self.n_players or any(not 0 <= a < n for a, n in zip(p, self.sizes)):
            raise ValueError(f"invalid profile {p} for action-set sizes {self.sizes}")
        return p

    def selection(self, p: Sequence[int], players: Sequence[int]) -> Action:
        """Concatenated sensing points chosen by `players` under profile `p`."""
        return tuple(k for j in players for k in self.action_sets[j][p[j]])

    def others(self, i: int) -> tuple[int, ...]:
        return tuple(j for j in range(self.n_players) if j != i)

    def conditioning_players(self, i: int) -> tuple[int, ...]:
        return self.others(i) if self.neighbors is None else self.neighbors[i]

    # --- values ----------------------------------------------------------

    def objective(self, p: Sequence[int]) -> float:
        return float(self.engine.mi(self.selection(p, range(self.n_players))))

    def utility(self, i: int, p: Sequence[int], action: int | None = None) -> float:
        """U_i (or the approximate utility) of playing `action` against p_{-i}."""
        a = p[i] if action is None else action
        cond = self.selection(p, self.conditioning_players(i))
        return float(self.engine.mi(self.action_sets[i][a], cond))

    def utilities(self, i: int, p: Sequence[int]) -> np.ndarray:
        """Utility of every action of player i against p_{-i}."""
        cond = self.selection(p, self.conditioning_players(i))
        return np.array([self.engine.mi(a, cond) for a in self.action_sets[i]])

    def best_response(self, i: int, p: Sequence[int]) -> int:
        # np.argmax returns the first maximum: lowest index wins ties
        return int(np.argmax(self.utilities(i, p)))

    def utility_table(self, limit: int = 10**6) -> np.ndarray:
        """Array of shape (N, |S_1|, ..., |S_N|) holding every U_i(s)."""
        table = np.empty((self.n_players, *self.sizes))
        for p in self.profiles(limit):
            for i in range(self.n_players):
                table[(i, *p)] = self.utility(i, p)
        return table

    def objective_table(self, limit: int = 10**6) -> np.ndarray:
        table = np.empty(self.sizes)
        for p in self.profiles(limit):
            table[p] = self.objective(p)
        return table


def _mode(g: SensorGame, utility_mode: Any) -> SensorGame:
    if utility_mode is None or utility_mode == "full":
        return g.full()
    if utility_mode == "game":
        return g
    if isinstance(utility_mode, NeighborMap):
        return g.with_neighbors(utility_mode)
    raise ValueError(f"unknown utility mode {utility_mode!r}")


def global_objective(g: SensorGame, p: Sequence[int]) -> float:
    """I(x_t; z_{s_1:N}) of the union of all chosen sensing points."""
    return g.objective(g.check_profile(p))


def local_utility_full(g: SensorGame, i: int, p: Sequence[int]) -> float:
    return g.full().utility(i, g.check_profile(p))


def local_utility_approx(g: SensorGame, i: int, p: Sequence[int], nm: NeighborMap) -> float:
    return g.with_neighbors(nm).utility(i, g.check_profile(p))


def _outside(g: SensorGame, i: int, nm: NeighborMap) -> tuple[int, ...]:
    inside = set(nm[i]) | {i}
    return tuple(j for j in range(g.n_players) if j not in inside)


def approx_error_term(
    g: SensorGame, i: int, p: Sequence[int], nm: NeighborMap, action: int | None = None
) -> float:
    """I(x_t; z_{s_-N_i} | z_{s_i + s_N_i}): action-dependent part of U~_i - U_i."""
    p = g.check_profile(p)
    a = p[i] if action is None else action
    outside = _outside(g, i, nm)
    if not outside:
        return 0.0
    own = g.action_sets[i][a] + g.selection(p, nm[i])
    return float(g.engine.mi(g.selection(p, outside), own))


def approx_error_measurement_term(
    g: SensorGame, i: int, p: Sequence[int], nm: NeighborMap, action: int | None = None
) -> float:
    """I(z_{s_i + N_i}; z_{-N_i}) - I(z_{s_i + N_i}; z_{-N_i} | x_t).

    Measurement-only form of the approximation error; equals U~_i - U_i up to
    a constant in player i's action.
    """
    p = g.check_profile(p)
    a = p[i] if action is None else action
    outside = _outside(g, i, nm)
    if not outside:
        return 0.0
    own = g.action_sets[i][a] + g.selection(p, nm[i])
    far = g.selection(p, outside)
    return float(g.engine.zz_mi(own, far) - g.engine.zz_mi(own, far, given_target=True))


def potentiality_gap(
    g: SensorGame, i: int, a1: int, a2: int, p: Sequence[int], nm: NeighborMap
) -> float:
    """Difference of the error term between actions a1 and a2 of player i.

    U~_i(a1) - U~_i(a2) = [phi(a1) - phi(a2)] - gap, so a zero gap means the
    approximate utility ranks a1 against a2 exactly as the potential does.
    """
    if a1 == a2:
        return 0.0
    return approx_error_term(g, i, p, nm, a1) - approx_error_term(g, i, p, nm, a2)


def is_epsilon_equilibrium(
    g: SensorGame, p: Sequence[int], eps: float = 0.0, utility_mode: Any = "full"
) -> tuple[bool, float]:
    """Whether no unilateral deviation gains more than `eps`; also the largest gain.

    `utility_mode` is ``"full"``, a :class:`NeighborMap`, or ``"game"`` to use
    whatever utilities `g` already carries.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    gm = _mode(g, utility_mode)
    p = g.check_profile(p)
    worst = -math.inf
    for i in range(gm.n_players):
        u = gm.utilities(i, p)
        worst = max(worst, float(u.max() - u[p[i]]))
    return worst <= eps + EQ_SLACK, worst


def equilibria_from_table(table: np.ndarray, eps: float = 0.0) -> list[Profile]:
    """All pure eps-equilibria of a utility table of shape (N, |S_1|, ..., |S_N|)."""
    n = table.shape[0]
    ok = np.ones(table.shape[1:], dtype=bool)
    for i in range(n):
        best = table[i].max(axis=i, keepdims=True)
        ok &= best - table[i] <= eps + EQ_SLACK
    return [tuple(int(k) for k in idx) for idx in np.argwhere(ok)]


def pure_nash_equilibria(
    g: SensorGame, eps: float = 0.0, utility_mode: Any = "game", limit: int = 10**6
) -> list[Profile]:
    return equilibria_from_table(_mode(g, utility_mode).utility_table(limit), eps)


def max_deviation_gain(table: np.ndarray, p: Profile) -> float:
    gains = [float(table[i].max(axis=i)[p[:i] + p[i + 1:]] - table[(i, *p)])
             for i in range(table.shape[0])]
    return max(gains)


@dataclass
class Theorem1Report:
    delta_u: float
    nash_full: list[Profile]
    nash_approx: list[Profile]
    violations: list[tuple[str, Profile, float]]

    @property
    def ok(self) -> bool:
        return not self.violations


def theorem1_check(g: SensorGame, nm: NeighborMap, limit: int = 10**6) -> Theorem1Report:
    """Exhaustively verify the equilibrium-closeness bound between G and G~.

    Delta_u is the largest |U_i(s) - U~_i(s)| over all players and profiles.
    Every Nash equilibrium of the full game must be a 2*Delta_u-equilibrium of
    the approximate game and every Nash equilibrium of the approximate game a
    2*Delta_u-equilibrium of the full one.  Violations are returned as
    (direction, profile, gain) triples.
    """
    if g.n_profiles > limit:
        raise TooLargeToEnumerate(f"{g.n_profiles} profiles exceed the limit {limit}")
    full = g.full().utility_table(limit)
    approx = g.with_neighbors(nm).utility_table(limit)
    delta = float(np.abs(full - approx).max())
    ne_full = equilibria_from_table(full)
    ne_approx = equilibria_from_table(approx)
    violations = []
    for direction, eqs, other in (("G->G~", ne_full, approx), ("G~->G", ne_approx, full)):
        for p in eqs:
            gain = max_deviation_gain(other, p)
            if gain > 2.0 * delta + EQ_SLACK:
                violations.append((direction, p, gain))
    return Theorem1Report(delta, ne_full, ne_approx, violations)


def lemma1_delta(g: SensorGame, nm: NeighborMap, limit: int = 10**6) -> float:
    """Largest action-dependent error term I(x_t; z_{-N_i} | z_{s_i + N_i}) over all i and profiles."""
    best = 0.0
    for p in g.profiles(limit):
        for i in range(g.n_players):
            best = max(best, approx_error_term(g, i, p, nm))
    return best


@dataclass
class Corollary1Report:
    holds: bool
    delta_u: float
    min_margin: float
    contained: bool | None
    missing: list[Profile]


def corollary1_condition(
    g: SensorGame,
    nm: NeighborMap,
    nash_set: Sequence[Profile] | None = None,
    delta: str = "lemma1",
    limit: int = 10**6,
) -> Corollary1Report:
    """Check the best/second-best margin condition that keeps full-game equilibria exact.

    The condition is U_i(s*) - U_i(s_i, s*_-i) >= 2*Delta_u for every
    equilibrium s* of the full game, player i and alternative s_i.  With
    ``delta="lemma1"`` Delta_u is the largest action-dependent error term;
    ``delta="theorem1"`` uses max |U - U~|.  When the condition holds, the
    containment of the full-game equilibria in the approximate game's
    equilibria is verified by enumeration; ``contained`` is None otherwise.
    """
    full = g.full().utility_table(limit)
    approx = g.with_neighbors(nm).utility_table(limit)
    if nash_set is None:
        nash_set = equilibria_from_table(full)
    if delta == "lemma1":
        du = lemma1_delta(g, nm, limit)
    elif delta == "theorem1":
        du = float(np.abs(full - approx).max())
    else:
        raise ValueError(f"unknown delta definition {delta!r}")
    margin = math.inf
    for p in nash_set:
        for i in range(g.n_players):
            u = full[i][p[:i] + (slice(None),) + p[i + 1:]]
            others = np.delete(u, p[i])
            if others.size:
                margin = min(margin, float(u[p[i]] - others.max()))
    holds = margin >= 2.0 * du
    contained, missing = None, []
    if holds:
        ne_approx = set(equilibria_from_table(approx))
        missing = [p for p in nash_set if p not in ne_approx]
        contained = not missing
    return Corollary1Report(holds, du, margin, contained, missing)
