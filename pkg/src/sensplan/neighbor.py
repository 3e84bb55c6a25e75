"""Neighbor-set construction: k-hop graph neighborhoods and greedy correlation-based selection."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import SingularDowndate
from .game import NeighborMap, SensorGame
from .gauss_info import _cholesky

DOWNDATE_FLOOR = 1e-12


@dataclass(frozen=True)
class CommGraph:
    """Undirected, connected communication graph over players."""

    adjacency: tuple[frozenset[int], ...]
    positions: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        adj = tuple(frozenset(int(j) for j in nbrs) for nbrs in self.adjacency)
        object.__setattr__(self, "adjacency", adj)
        for i, nbrs in enumerate(adj):
            if i in nbrs:
                raise ValueError(f"self-loop at player {i}")
            for j in nbrs:
                if not 0 <= j < len(adj) or i not in adj[j]:
                    raise ValueError(f"edge ({i}, {j}) is not symmetric")
        if adj and len(self.hop_distances(0)) != len(adj):
            raise ValueError("communication graph is not connected")

    @classmethod
    def from_edges(cls, n: int, edges, positions=None) -> "CommGraph":
        adj = [set() for _ in range(n)]
        for i, j in edges:
            adj[i].add(j)
            adj[j].add(i)
        return cls(tuple(frozenset(a) for a in adj), positions)

    @classmethod
    def grid(cls, positions: Sequence[Sequence[float]], spacing: float = 1.0) -> "CommGraph":
        """Players at grid coordinates, joined when one grid step apart (4-neighborhood)."""
        pos = [tuple(float(c) for c in p) for p in positions]
        edges = [
            (i, j)
            for i in range(len(pos))
            for j in range(i + 1, len(pos))
            if math.isclose(sum(abs(a - b) for a, b in zip(pos[i], pos[j])), spacing)
        ]
        return cls.from_edges(len(pos), edges, tuple(pos))

    @property
    def n(self) -> int:
        return len(self.adjacency)

    def hop_distances(self, source: int) -> dict[int, int]:
        dist = {source: 0}
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for v in sorted(self.adjacency[u]):
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist


def geometry_neighbors(graph: CommGraph, k: int) -> NeighborMap:
    """N_i = every player within `k` hops of i."""
    if k < 1:
        raise ValueError("hop radius must be at least 1")
    sets = []
    for i in range(graph.n):
        dist = graph.hop_distances(i)
        sets.append(tuple(sorted(j for j, d in dist.items() if 0 < d <= k)))
    return NeighborMap(tuple(sets))


def _condition_on(p: np.ndarray, keep: np.ndarray, given: np.ndarray) -> np.ndarray:
    if given.size == 0:
        return p[np.ix_(keep, keep)].copy()
    chol = _cholesky(p[np.ix_(given, given)], SingularDowndate)
    half = np.linalg.solve(chol, p[np.ix_(given, keep)])
    out = p[np.ix_(keep, keep)] - half.T @ half
    return 0.5 * (out + out.T)


def greedy_scores(p0: np.ndarray, pt: np.ndarray) -> np.ndarray:
    """e_y = log(P0(z_y) / Pt(z_y)) for every remaining candidate."""
    # zero variances give nan/inf here; the caller rejects them against a floor
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(np.diag(p0) / np.diag(pt))


def _downdate(p: np.ndarray, y: int) -> np.ndarray:
    col = p[:, y]
    out = p - np.outer(col, col) / p[y, y]
    keep = np.arange(p.shape[0]) != y
    return out[np.ix_(keep, keep)]


@dataclass
class CorrelationSelection:
    locations: list[int]
    players: list[int]
    scores: list[float]


def correlation_neighbors(
    p0: np.ndarray,
    pt: np.ndarray,
    own_points: Sequence[int],
    owners: Mapping[int, int],
    n: int,
    condition_on_own: bool = False,
    budget_unit: str = "players",
) -> CorrelationSelection:
    """Greedy neighbor selection from prior and target-conditioned measurement covariances.

    `p0` and `pt` are P(z) and P(z | x_t) over every candidate point.
    Candidates are all points not in `own_points`; with `condition_on_own`
    they are first conditioned on the player's whole region.  Each round picks the candidate
    with the largest log variance ratio (equivalently the largest
    I(z_y; x_t | selected)) and downdates both matrices on it.  `n` counts
    locations, or distinct owning players with ``budget_unit="players"``.
    """
    p0 = np.asarray(p0, dtype=float)
    pt = np.asarray(pt, dtype=float)
    own = np.array(sorted(set(int(k) for k in own_points)), dtype=int)
    own_set = set(own.tolist())
    cand = np.array([k for k in range(p0.shape[0]) if k not in own_set], dtype=int)
    if budget_unit not in ("locations", "players"):
        raise ValueError(f"unknown budget unit {budget_unit!r}")
    if budget_unit == "locations" and n > cand.size:
        raise ValueError(f"budget {n} exceeds the {cand.size} remaining candidates")
    given = own if condition_on_own else np.array([], dtype=int)
    a = _condition_on(p0, cand, given)
    b = _condition_on(pt, cand, given)
    remaining = list(cand.tolist())
    locations, players, scores = [], [], []
    floor = DOWNDATE_FLOOR * max(float(np.mean(np.diag(p0))), 1e-300)

    def done() -> bool:
        if not remaining:
            return True
        return (len(locations) if budget_unit == "locations" else len(players)) >= n

    while not done():
        e = greedy_scores(a, b)
        y = int(np.argmax(e))
        if a[y, y] <= floor or b[y, y] <= floor:
            raise SingularDowndate(f"candidate {remaining[y]} has nonpositive variance")
        loc = remaining.pop(y)
        locations.append(loc)
        scores.append(float(e[y]))
        owner = owners[loc]
        if owner not in players:
            players.append(owner)
        a = _downdate(a, y)
        b = _downdate(b, y)
    return CorrelationSelection(locations, players, scores)


def default_corr_budget(n_players: int) -> int:
    """Half of the full-information conditioning set, rounded up."""
    return max(1, math.ceil((n_players - 1) / 2))


def correlation_neighbor_map(
    g: SensorGame,
    n: int | None = None,
    condition_on_own: bool = False,
    budget_unit: str = "players",
) -> NeighborMap:
    """Run the greedy selection for every player of `g` using the engine's z covariances."""
    p0, pt = g.engine.z_covariances()
    owners = g.owner_of_points()
    n = default_corr_budget(g.n_players) if n is None else n
    points = sorted(owners)
    # restrict to the game's own candidate space
    index = {k: r for r, k in enumerate(points)}
    sub = np.array(points, dtype=int)
    p0s, pts = p0[np.ix_(sub, sub)], pt[np.ix_(sub, sub)]
    local_owner = {index[k]: owners[k] for k in points}
    sets = []
    for i in range(g.n_players):
        sel = correlation_neighbors(
            p0s, pts, [index[k] for k in g.region(i)], local_owner, n,
            condition_on_own=condition_on_own, budget_unit=budget_unit,
        )
        sets.append(tuple(sel.players))
    return NeighborMap(tuple(sets))
