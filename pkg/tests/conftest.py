import numpy as np
import pytest

from sensplan.gauss_info import SENSING, TARGET, GaussianEngine, JointGaussian, NoiseModel, VariableSet
from sensplan.game import SensorGame


def random_spd(rng, d, extra=2, ridge=0.05):
    a = rng.standard_normal((d, d + extra))
    return a @ a.T / (d + extra) + ridge * np.eye(d)


def make_joint(rng, n_sense, n_target, ridge=0.05):
    labels = [f"s{k}" for k in range(n_sense)] + [f"t{k}" for k in range(n_target)]
    kinds = [SENSING] * n_sense + [TARGET] * n_target
    return JointGaussian(VariableSet(tuple(labels), tuple(kinds)), random_spd(rng, n_sense + n_target, ridge=ridge))


def noisy_full(jg, noise):
    """Joint covariance of (z_S, x_t) with measurement noise on the sensing diagonal."""
    cov = np.array(jg.cov)
    for k, lab in enumerate(jg.vars.labels):
        if jg.vars.kind(lab) == SENSING:
            cov[k, k] += noise.variances[lab]
    return cov


def _ld(cov, idx):
    if len(idx) == 0:
        return 0.0
    sign, val = np.linalg.slogdet(cov[np.ix_(idx, idx)])
    assert sign > 0
    return val


def oracle_cmi(cov, a, c, t):
    """I(x_t; z_a | z_c) from plain log-determinants of the full noisy joint."""
    a, c, t = list(a), list(c), list(t)
    return 0.5 * (_ld(cov, a + c) - _ld(cov, c) - _ld(cov, a + c + t) + _ld(cov, c + t))


def oracle_zz(cov, a, b, c):
    a, b, c = list(a), list(b), list(c)
    return 0.5 * (_ld(cov, a + c) + _ld(cov, b + c) - _ld(cov, a + b + c) - _ld(cov, c))


def engine_for(jg, noise):
    return GaussianEngine.from_joint(jg, jg.vars.sensing, jg.vars.targets, noise)


def random_game(rng, n_players, max_actions=4, points_per_action=1, n_target=2):
    """Random Gaussian game; player i owns a contiguous block of points."""
    sizes = [int(s) for s in rng.integers(2, max_actions + 1, size=n_players)]
    acts, k = [], 0
    for n in sizes:
        span = n + points_per_action - 1
        acts.append(tuple(tuple(range(k + j, k + j + points_per_action)) for j in range(n)))
        k += span
    jg = make_joint(rng, k, n_target)
    noise = NoiseModel.uniform(jg.vars.sensing, 0.1)
    return SensorGame(engine_for(jg, noise), tuple(acts)), jg, noise


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per criterion, printed in the terminal summary."""
    store = request.config.stash[ACCEPTANCE]

    def record(n, ok, detail):
        key = (int(str(n).rstrip("ab")), str(n))
        store[key] = f"criterion {str(n):>3}: {'PASS' if ok else 'FAIL'}  {detail}"
        return ok

    return record
