"""Weather sensor targeting on a two-dimensional Lorenz-95 model.

The state is an array of shape ``(..., n_lon, n_lat)``.  Longitude wraps
cyclically; latitude is closed with ghost rows held at the forcing value.
An ensemble square-root filter cycles a fixed routine network, and the
ensemble is then used to estimate the joint Gaussian over candidate
measurement states at t_s and verification states at t_v.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NonFinite
from .game import SensorGame
from .gauss_info import SENSING, TARGET, GaussianEngine, JointGaussian, NoiseModel, VariableSet

LAT_COUPLING = 2.0 / 3.0


def lorenz_deriv(y: np.ndarray, forcing: float = 8.0) -> np.ndarray:
    """Time derivative of the 2-D Lorenz-95 field."""
    y = np.asarray(y, dtype=float)
    lon = -2
    adv_lon = (np.roll(y, -1, axis=lon) - np.roll(y, 2, axis=lon)) * np.roll(y, 1, axis=lon)
    pad = [(0, 0)] * y.ndim
    pad[-1] = (2, 1)
    yp = np.pad(y, pad, mode="constant", constant_values=forcing)
    # padded latitude index j+2 holds y[..., j]
    north = yp[..., 3:]
    south2 = yp[..., :-3]
    south1 = yp[..., 1:-2]
    adv_lat = LAT_COUPLING * (north - south2) * south1
    return adv_lon + adv_lat - y + forcing


def rk4_step(y: np.ndarray, dt: float, forcing: float = 8.0) -> np.ndarray:
    if dt <= 0:
        raise ValueError("dt must be positive")
    # overflow surfaces as the NonFinite check below
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = lorenz_deriv(y, forcing)
        k2 = lorenz_deriv(y + 0.5 * dt * k1, forcing)
        k3 = lorenz_deriv(y + 0.5 * dt * k2, forcing)
        k4 = lorenz_deriv(y + dt * k3, forcing)
        out = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFinite("Lorenz integration produced non-finite values")
    return out


def integrate(y: np.ndarray, duration: float, dt: float, forcing: float = 8.0) -> np.ndarray:
    steps = int(round(duration / dt))
    if not np.isclose(steps * dt, duration):
        raise ValueError(f"duration {duration} is not a multiple of dt {dt}")
    for _ in range(steps):
        y = rk4_step(y, dt, forcing)
    return y


def ensrf_assimilate(
    ens: np.ndarray,
    obs_idx,
    obs: np.ndarray,
    r: float,
    inflation: float = 1.0,
) -> np.ndarray:
    """Serial ensemble square-root update (no perturbed observations).

    `ens` has shape (m, n) with flattened states; observations are direct
    point values at the flat indices `obs_idx`, processed in ascending index
    order, each with noise variance `r`.
    """
    ens = np.array(ens, dtype=float)
    m = ens.shape[0]
    if m < 2:
        raise ValueError("ensemble needs at least two members")
    if r <= 0:
        raise ValueError("observation noise variance must be positive")
    mean = ens.mean(axis=0)
    pert = ens - mean
    if inflation != 1.0:
        pert *= inflation
    order = np.argsort(np.asarray(obs_idx), kind="stable")
    obs_idx = np.asarray(obs_idx)[order]
    obs = np.asarray(obs, dtype=float)[order]
    for k, y in zip(obs_idx, obs):
        hx = pert[:, k]
        var = hx @ hx / (m - 1)
        gain = (pert.T @ hx) / (m - 1) / (var + r)
        mean = mean + gain * (y - mean[k])
        alpha = 1.0 / (1.0 + np.sqrt(r / (var + r)))
        pert = pert - alpha * np.outer(hx, gain)
    out = mean + pert
    if not np.all(np.isfinite(out)):
        raise NonFinite("EnSRF update diverged")
    return out


@dataclass(frozen=True)
class WeatherCase:
    """One search-space topology: a lon x lat block split into agent sub-blocks."""

    case_id: int
    lon0: int
    lat0: int
    n_lon: int
    n_lat: int
    agent_lon: int
    agent_lat: int

    @property
    def n_agents(self) -> int:
        return (self.n_lon // self.agent_lon) * (self.n_lat // self.agent_lat)

    def agents(self):
        """Yield (agent grid position, list of (lon, lat) cells), agents in row-major order."""
        for aj in range(self.n_lat // self.agent_lat):
            for ai in range(self.n_lon // self.agent_lon):
                cells = [
                    (self.lon0 + ai * self.agent_lon + di, self.lat0 + aj * self.agent_lat + dj)
                    for dj in range(self.agent_lat)
                    for di in range(self.agent_lon)
                ]
                yield (ai, aj), cells


# Case layouts inside the 12 x 9 oceanic search region (lon 12..23).  Errors
# travel toward decreasing longitude index in this model, so the verification
# block sits downstream at lon 9..11 and case 2 is the nearer of the 9 x 6 cases.
WEATHER_CASES = {
    1: WeatherCase(1, lon0=15, lat0=0, n_lon=9, n_lat=6, agent_lon=3, agent_lat=2),
    2: WeatherCase(2, lon0=12, lat0=3, n_lon=9, n_lat=6, agent_lon=3, agent_lat=2),
    3: WeatherCase(3, lon0=12, lat0=0, n_lon=10, n_lat=9, agent_lon=2, agent_lat=3),
}


@dataclass(frozen=True)
class LorenzConfig:
    n_lon: int = 36
    n_lat: int = 9
    forcing: float = 8.0
    dt: float = 0.01
    obs_interval: float = 0.05
    t_s: float = 0.05
    t_v: float = 0.55
    n_routine: int = 93
    routine_noise: float = 0.22**2
    candidate_noise: float = 0.22**2
    ensemble_size: int = 1024
    spinup_time: float = 10.0
    cycles: int = 40
    init_spread: float = 1.0
    inflation: float = 1.0
    layout_seed: int = 2024
    search_lon: tuple[int, int] = (12, 24)
    verification_lon: tuple[int, int] = (9, 12)
    verification_lat: tuple[int, int] = (3, 6)

    @classmethod
    def from_dict(cls, d: dict | None) -> "LorenzConfig":
        d = dict(d or {})
        for key in ("search_lon", "verification_lon", "verification_lat"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("search_lon", "verification_lon", "verification_lat"):
            d[key] = list(d[key])
        return d

    def flat(self, lon: int, lat: int) -> int:
        return lon * self.n_lat + lat

    def search_cells(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(*self.search_lon) for j in range(self.n_lat)]

    def verification_cells(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(*self.verification_lon) for j in range(*self.verification_lat)]

    def routine_sites(self) -> np.ndarray:
        """Flat indices of the fixed routine network, drawn from land cells."""
        lo, hi = self.search_lon
        land = [
            self.flat(i, j)
            for i in range(self.n_lon)
            for j in range(self.n_lat)
            if not lo <= i < hi
        ]
        if self.n_routine > len(land):
            raise ValueError("more routine sensors than land cells")
        rng = np.random.default_rng(self.layout_seed)
        return np.sort(rng.choice(land, size=self.n_routine, replace=False))


def _label(prefix: str, cell: tuple[int, int], when: str) -> str:
    return f"{prefix}[{cell[0]},{cell[1]}]@{when}"


def build_joint(config: LorenzConfig, seed: int) -> JointGaussian:
    """Sample covariance over search-region states at t_s and verification states at t_v.

    Spins up a nature run, cycles the ensemble with routine observations
    every `obs_interval`, forecasts to t_s (assimilating routine observations
    on the way, including at t_s), then propagates every member to t_v.
    """
    cfg = config
    rng = np.random.default_rng(seed)
    shape = (cfg.n_lon, cfg.n_lat)
    steps_per_obs = int(round(cfg.obs_interval / cfg.dt))
    sites = cfg.routine_sites()
    sd = np.sqrt(cfg.routine_noise)

    truth = cfg.forcing + 0.01 * rng.standard_normal(shape)
    truth = integrate(truth, cfg.spinup_time, cfg.dt, cfg.forcing)
    ens = truth[None] + cfg.init_spread * rng.standard_normal((cfg.ensemble_size, *shape))

    def cycle(truth, ens):
        for _ in range(steps_per_obs):
            truth = rk4_step(truth, cfg.dt, cfg.forcing)
            ens = rk4_step(ens, cfg.dt, cfg.forcing)
        obs = truth.reshape(-1)[sites] + sd * rng.standard_normal(sites.size)
        flat = ensrf_assimilate(ens.reshape(cfg.ensemble_size, -1), sites, obs,
                                cfg.routine_noise, cfg.inflation)
        return truth, flat.reshape(ens.shape)

    for _ in range(cfg.cycles):
        truth, ens = cycle(truth, ens)
    n_ts = int(round(cfg.t_s / cfg.obs_interval))
    for _ in range(n_ts):
        truth, ens = cycle(truth, ens)

    search = cfg.search_cells()
    verif = cfg.verification_cells()
    flat_ens = ens.reshape(cfg.ensemble_size, -1)
    x_s = flat_ens[:, [cfg.flat(*c) for c in search]]
    ens_v = integrate(ens, cfg.t_v - cfg.t_s, cfg.dt, cfg.forcing)
    x_v = ens_v.reshape(cfg.ensemble_size, -1)[:, [cfg.flat(*c) for c in verif]]

    samples = np.hstack([x_s, x_v])
    cov = np.cov(samples, rowvar=False, ddof=1)
    labels = [_label("x", c, "ts") for c in search] + [_label("y", c, "tv") for c in verif]
    kinds = [SENSING] * len(search) + [TARGET] * len(verif)
    return JointGaussian(VariableSet(tuple(labels), tuple(kinds)), cov)


@dataclass
class WeatherScenario:
    config: LorenzConfig
    case: WeatherCase
    joint: JointGaussian = field(repr=False)
    game: SensorGame = field(repr=False)
    agent_positions: list[tuple[int, int]]
    point_cells: list[tuple[int, int]]


def build_game(joint: JointGaussian, config: LorenzConfig, case: WeatherCase) -> WeatherScenario:
    """Game for one case: each agent picks one cell of its sub-block (n_i = 1)."""
    cells, positions, action_sets = [], [], []
    for pos, agent_cells in case.agents():
        positions.append(pos)
        acts = []
        for c in agent_cells:
            acts.append((len(cells),))
            cells.append(c)
        action_sets.append(tuple(acts))
    sensing = [_label("x", c, "ts") for c in cells]
    noise = NoiseModel.uniform(sensing, config.candidate_noise)
    engine = GaussianEngine.from_joint(joint, sensing, joint.vars.targets, noise)
    game = SensorGame(engine, tuple(action_sets))
    return WeatherScenario(config, case, joint, game, positions, cells)


def weather_scenario(config: LorenzConfig, case_id: int, seed: int,
                     joint: JointGaussian | None = None) -> WeatherScenario:
    joint = build_joint(config, seed) if joint is None else joint
    return build_game(joint, config, WEATHER_CASES[case_id])
