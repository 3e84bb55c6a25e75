"""Centralized exhaustive search over every action profile."""
from __future__ import annotations

from ..errors import TooLargeToEnumerate
from ..game import Profile, SensorGame
from .manifest import ORACLE_LIMIT


def exhaustive_oracle(g: SensorGame, limit: int = ORACLE_LIMIT) -> tuple[Profile, float]:
    """Argmax of the global objective; ties go to the lexicographically smallest profile."""
    if g.n_profiles > limit:
        raise TooLargeToEnumerate(f"{g.n_profiles} profiles exceed the guard of {limit}")
    best, best_val = None, float("-inf")
    for p in g.profiles():
        v = g.objective(p)
        if v > best_val:
            best, best_val = p, v
    return best, best_val
