import itertools
import math

import numpy as np
import pytest

from sensplan.errors import Degeneracy, OutcomeSpaceTooLarge
from sensplan.game import SensorGame
from sensplan.tracking import (
    TRACKING_CASES,
    DetectionSensor,
    ParticleEngine,
    ParticleSet,
    TrackingConfig,
    detection_prob,
    jmpd_step,
    mc_cond_entropy,
    mc_entropy,
    outcome_likelihoods,
    particle_utility,
    systematic_resample,
    tracking_scenario,
)


def random_particles(rng, n=30, t=2, varying=True):
    states = np.zeros((n, t, 4))
    states[:, :, :2] = rng.uniform(0, 2400, size=(n, t, 2))
    states[:, :, 2:] = rng.normal(0, 3, size=(n, t, 2))
    w = rng.random(n)
    counts = rng.integers(0, t + 1, size=n) if varying else np.full(n, t)
    return ParticleSet(w / w.sum(), states, counts)


def oracle_entropies(probs, w):
    """(H(z), H(z|x)) summed outcome by outcome."""
    k = probs.shape[1]
    h, hc = 0.0, 0.0
    for z in itertools.product((0, 1), repeat=k):
        lik = np.ones(len(w))
        for j, zj in enumerate(z):
            lik = lik * (probs[:, j] if zj else 1.0 - probs[:, j])
        q = float(w @ lik)
        if q > 0:
            h -= q * math.log(q)
        hc -= float(sum(wi * li * math.log(li) for wi, li in zip(w, lik) if li > 0))
    return h, hc


def test_detection_probability_formula():
    sensor = DetectionSensor(p_d0=0.9, r0=600.0, p_fa=0.05)
    states = np.zeros((2, 2, 4))
    states[0, 0, :2] = (300.0, 400.0)  # range 500 from origin
    states[0, 1, :2] = (2000.0, 2000.0)
    ps = ParticleSet(np.array([0.5, 0.5]), states, np.array([2, 0]))
    p = detection_prob(np.array([[0.0, 0.0]]), ps, sensor)
    expect = 1 - (1 - 0.9 * math.exp(-500 / 600)) * (1 - 0.05)
    assert p[0, 0] == pytest.approx(expect, abs=1e-15)
    assert p[1, 0] == pytest.approx(0.05, abs=1e-15)


def test_sensor_and_particle_validation():
    with pytest.raises(ValueError):
        DetectionSensor(p_d0=0.0)
    with pytest.raises(ValueError):
        DetectionSensor(r0=-1.0)
    with pytest.raises(ValueError):
        DetectionSensor(p_fa=1.0)
    with pytest.raises(ValueError):
        ParticleSet(np.array([0.5, 0.4]), np.zeros((2, 1, 4)), np.ones(2))
    with pytest.raises(ValueError):
        ParticleSet(np.array([1.0]), np.zeros((1, 1, 4)), np.array([2]))


def test_outcome_likelihood_rows_normalized(rng):
    probs = rng.random((7, 5))
    lik = outcome_likelihoods(probs)
    assert lik.shape == (7, 32)
    np.testing.assert_allclose(lik.sum(axis=1), 1.0, atol=1e-14)
    # bit j of the column index is the outcome of column j
    col = 0b10110
    expect = np.prod([probs[:, j] if col >> j & 1 else 1 - probs[:, j] for j in range(5)], axis=0)
    np.testing.assert_allclose(lik[:, col], expect, atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_entropies_match_enumeration_oracle(seed):
    rng = np.random.default_rng(seed)
    ps = random_particles(rng)
    eng = ParticleEngine(ps, rng.uniform(0, 2400, size=(7, 2)), DetectionSensor())
    sel = tuple(int(k) for k in rng.integers(0, 7, size=5))
    h, hc = oracle_entropies(eng.probs[:, list(sel)], ps.weights)
    assert eng.entropy(sel) == pytest.approx(h, abs=1e-12)
    assert eng.cond_entropy(sel) == pytest.approx(hc, abs=1e-12)
    assert mc_entropy(eng.probs[:, list(sel)], ps.weights) == pytest.approx(h, abs=1e-12)
    assert mc_cond_entropy(eng.probs[:, list(sel)], ps.weights, enumerate_outcomes=True) == pytest.approx(hc, abs=1e-12)


def test_mi_chain_rule_and_sign(rng):
    ps = random_particles(rng)
    eng = ParticleEngine(ps, rng.uniform(0, 2400, size=(6, 2)), DetectionSensor())
    a, b, c = (0, 1), (2,), (3, 4)
    assert eng.mi(a + b, c) == pytest.approx(eng.mi(a, c) + eng.mi(b, a + c), abs=1e-12)
    assert eng.mi(a, c) >= -1e-12
    assert particle_utility(eng, a) == pytest.approx(eng.mi(a), abs=0)
    assert eng.mi((), c) == 0.0


def test_conditional_independence_given_hypothesis(rng):
    ps = random_particles(rng)
    eng = ParticleEngine(ps, rng.uniform(0, 2400, size=(6, 2)), DetectionSensor())
    assert abs(eng.zz_mi((0, 1), (2, 3), (4,), given_target=True)) <= 1e-12
    assert eng.zz_mi((0, 1), (2, 3)) >= -1e-12


def test_far_sensors_carry_no_information(rng):
    ps = random_particles(rng, varying=False)
    far = np.array([[1e6, 1e6], [-1e6, 1e6]])
    eng = ParticleEngine(ps, far, DetectionSensor())
    assert abs(eng.mi((0, 1))) <= 1e-6


def test_guard(rng):
    ps = random_particles(rng, n=5)
    eng = ParticleEngine(ps, rng.uniform(0, 2400, size=(3, 2)), DetectionSensor(), guard=4)
    with pytest.raises(OutcomeSpaceTooLarge):
        eng.entropy((0, 1, 2, 0, 1))
    with pytest.raises(OutcomeSpaceTooLarge):
        mc_entropy(np.full((2, 21), 0.5), np.array([0.5, 0.5]))


def test_covariance_surrogate(rng):
    ps = random_particles(rng)
    eng = ParticleEngine(ps, rng.uniform(0, 2400, size=(5, 2)), DetectionSensor())
    p0, pt = eng.z_covariances()
    w, p = ps.weights, eng.probs
    mean = w @ p
    expect = np.cov(p.T, aweights=w, bias=True)
    expect[np.diag_indices(5)] = mean * (1 - mean)
    np.testing.assert_allclose(p0 - 1e-9 * np.eye(5), expect, atol=1e-12)
    np.testing.assert_allclose(np.diag(pt), w @ (p * (1 - p)) + 1e-9, atol=1e-15)
    assert np.linalg.eigvalsh(p0 - pt).min() >= -1e-12


def test_two_agent_alignment(rng):
    ps = random_particles(rng)
    eng = ParticleEngine(ps, rng.uniform(0, 2400, size=(6, 2)), DetectionSensor())
    acts = (tuple(itertools.combinations_with_replacement((0, 1, 2), 2)),
            tuple(itertools.combinations_with_replacement((3, 4, 5), 2)))
    g = SensorGame(eng, acts)
    for p in g.profiles():
        for a in range(g.sizes[0]):
            q = (a, p[1])
            assert g.utility(0, q) - g.utility(0, p) == pytest.approx(g.objective(q) - g.objective(p), abs=1e-12)


def test_jmpd_no_observation_and_deterministic_motion(rng):
    ps = random_particles(rng, varying=False)
    out = jmpd_step(ps, np.random.default_rng(0), dt=10.0, accel_sd=0.0)
    np.testing.assert_array_equal(out.weights, ps.weights)
    np.testing.assert_allclose(out.states[:, :, :2], ps.states[:, :, :2] + 10.0 * ps.states[:, :, 2:], atol=1e-12)
    np.testing.assert_array_equal(out.states[:, :, 2:], ps.states[:, :, 2:])


def test_jmpd_shared_seed_is_bit_identical(rng):
    ps = random_particles(rng)
    pts = np.array([[600.0, 600.0], [1800.0, 1800.0]])
    kw = dict(dt=10.0, accel_sd=1.0, points=pts, detections=np.array([1, 0]), sensor=DetectionSensor())
    a = jmpd_step(ps, np.random.default_rng(42), **kw)
    b = jmpd_step(ps, np.random.default_rng(42), **kw)
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(a.weights, b.weights)


def test_jmpd_reweights_and_resamples():
    states = np.zeros((100, 1, 4))
    states[:50, 0, :2] = (100.0, 100.0)
    states[50:, 0, :2] = (2300.0, 2300.0)
    ps = ParticleSet(np.full(100, 0.01), states, np.ones(100, dtype=int))
    pts = np.array([[100.0, 100.0]] * 6)
    out = jmpd_step(ps, np.random.default_rng(1), accel_sd=0.0, points=pts,
                    detections=np.ones(6), sensor=DetectionSensor(), resample_threshold=0.6)
    # the far cluster loses its weight, halving the ESS and forcing a resample
    np.testing.assert_allclose(out.weights, 0.01)
    assert (out.states[:, 0, 0] < 1000).mean() > 0.9


def test_jmpd_degeneracy_resets_weights():
    states = np.zeros((4, 1, 4))
    ps = ParticleSet(np.full(4, 0.25), states, np.ones(4, dtype=int))
    sensor = DetectionSensor(p_d0=1.0, p_fa=0.0)
    with pytest.warns(Degeneracy):
        out = jmpd_step(ps, np.random.default_rng(0), accel_sd=0.0, points=np.zeros((1, 2)),
                        detections=np.array([0]), sensor=sensor)
    np.testing.assert_allclose(out.weights, 0.25)
    with pytest.raises(ValueError):
        jmpd_step(ps, np.random.default_rng(0), detections=np.array([1]))


def test_systematic_resample_counts():
    w = np.array([0.5, 0.25, 0.25, 0.0])
    idx = systematic_resample(w, np.random.default_rng(3))
    counts = np.bincount(idx, minlength=4)
    assert counts.tolist() == [2, 1, 1, 0]


def test_particle_table_roundtrip(rng):
    ps = random_particles(rng, n=6)
    rows = list(ps.to_rows())
    assert [len(r[2]) for r in rows] == [4 * c for c in ps.counts]


def test_tracking_scenario_layout():
    cfg = TrackingConfig(n_particles=100)
    for case_id, (players, per_player) in {1: (6, 6), 2: (6, 6)}.items():
        sc = tracking_scenario(cfg, case_id, 0)
        g = sc.game
        assert g.n_players == players
        assert all(len(g.region(i)) == per_player for i in range(players))
        # two points drawn from six with replacement: 21 multisets
        assert set(g.sizes) == {21}
        assert sc.points.shape == (36, 2)
    assert TRACKING_CASES[1].agents_x * TRACKING_CASES[1].cells_x == 6
    a = tracking_scenario(cfg, 1, 5)
    b = tracking_scenario(cfg, 1, 5)
    np.testing.assert_array_equal(a.particles.states, b.particles.states)
    assert TrackingConfig.from_dict(cfg.to_dict()) == cfg
