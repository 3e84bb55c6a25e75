"""Run manifests: a JSON document that fully determines a comparison run."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .. import __version__
from ..errors import ManifestError

SCENARIOS = ("weather", "tracking")
STRATEGIES = (
    "local-greedy",
    "sequential-greedy",
    "jsfp-full",
    "jsfp-full-inertia",
    "jsfp-approx-khop",
    "jsfp-approx-corr",
    "oracle",
)
DEFAULT_STRATEGIES = STRATEGIES[:-1]
ORACLE_LIMIT = 10**7


@dataclass
class RunManifest:
    scenario: str
    cases: list[int]
    seeds: list[int] = field(default_factory=lambda: [0])
    strategies: list[str] = field(default_factory=lambda: list(DEFAULT_STRATEGIES))
    inertia: float = 0.3
    inertia_seeds: int = 20
    hops: int = 2
    corr_budget: int | None = None
    corr_budget_unit: str = "players"
    corr_condition_on_own: bool = False
    max_stages: int = 50
    oracle_limit: int = ORACLE_LIMIT
    config: dict = field(default_factory=dict)
    out_dir: str = "runs/out"
    version: str = __version__

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ManifestError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        unknown = [s for s in self.strategies if s not in STRATEGIES]
        if unknown:
            raise ManifestError(f"unknown strategies {unknown}; expected a subset of {STRATEGIES}")
        if not self.strategies:
            raise ManifestError("at least one strategy is required")
        if not self.cases:
            raise ManifestError("at least one case is required")
        valid_cases = (1, 2, 3) if self.scenario == "weather" else (1, 2)
        bad = [c for c in self.cases if c not in valid_cases]
        if bad:
            raise ManifestError(f"cases {bad} are not defined for {self.scenario}")
        if not 0.0 <= self.inertia <= 1.0:
            raise ManifestError("inertia must lie in [0, 1]")
        if self.inertia_seeds < 1 or self.max_stages < 1 or self.hops < 1:
            raise ManifestError("inertia_seeds, max_stages and hops must be positive")
        if self.corr_budget_unit not in ("locations", "players"):
            raise ManifestError("corr_budget_unit must be 'locations' or 'players'")
        self.cases = [int(c) for c in self.cases]
        self.seeds = [int(s) for s in self.seeds]
        # validates the scenario constants eagerly and records every one of them
        self.config = self.scenario_config().to_dict()

    def scenario_config(self):
        from ..lorenz import LorenzConfig
        from ..tracking import TrackingConfig

        cls = LorenzConfig if self.scenario == "weather" else TrackingConfig
        try:
            return cls.from_dict(self.config)
        except TypeError as exc:
            raise ManifestError(f"bad scenario config: {exc}") from None

    @property
    def khop_name(self) -> str:
        return f"jsfp-approx-{self.hops}hop"

    def strategy_label(self, name: str) -> str:
        return self.khop_name if name == "jsfp-approx-khop" else name

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        if not isinstance(d, dict):
            raise ManifestError("manifest must be a JSON object")
        names = set(cls.__dataclass_fields__)
        extra = sorted(set(d) - names)
        if extra:
            raise ManifestError(f"unknown manifest keys {extra}")
        missing = [k for k in ("scenario", "cases") if k not in d]
        if missing:
            raise ManifestError(f"manifest is missing {missing}")
        return cls(**d)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def load_manifest(path: str | Path) -> RunManifest:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    return RunManifest.from_dict(data)
