import itertools

import numpy as np
import pytest

from sensplan.errors import TooLargeToEnumerate
from sensplan.game import (
    NeighborMap,
    SensorGame,
    approx_error_measurement_term,
    approx_error_term,
    corollary1_condition,
    equilibria_from_table,
    global_objective,
    is_epsilon_equilibrium,
    lemma1_delta,
    local_utility_approx,
    local_utility_full,
    potentiality_gap,
    pure_nash_equilibria,
    theorem1_check,
)
from sensplan.gauss_info import GaussianEngine

from conftest import noisy_full, oracle_cmi, random_game


def deviations(g):
    for p in g.profiles():
        for i in range(g.n_players):
            for a in range(g.sizes[i]):
                if a != p[i]:
                    yield p, i, p[:i] + (a,) + p[i + 1:]


def test_neighbor_map_validation():
    with pytest.raises(ValueError):
        NeighborMap(((0,), ()))
    with pytest.raises(ValueError):
        NeighborMap(((5,), ()))
    nm = NeighborMap.complete(3)
    assert nm.to_lists() == [[1, 2], [0, 2], [0, 1]]
    assert NeighborMap.empty(2).sizes() == [0, 0]


def test_game_validation(rng):
    g, _, _ = random_game(rng, 2)
    with pytest.raises(ValueError):
        SensorGame(g.engine, (((0,),), ((0,),)))
    with pytest.raises(ValueError):
        SensorGame(g.engine, ((),))
    with pytest.raises(ValueError):
        g.check_profile((99, 0))
    with pytest.raises(TooLargeToEnumerate):
        list(g.profiles(limit=1))


def test_objective_matches_oracle(rng):
    g, jg, noise = random_game(rng, 3)
    cov = noisy_full(jg, noise)
    t = list(range(len(jg.vars.sensing), len(jg.vars)))
    for p in itertools.islice(g.profiles(), 5):
        sel = list(g.selection(p, range(3)))
        assert global_objective(g, p) == pytest.approx(oracle_cmi(cov, sel, [], t), abs=1e-11)
        conditioning = list(g.selection(p, (1, 2)))
        assert local_utility_full(g, 0, p) == pytest.approx(
            oracle_cmi(cov, list(g.selection(p, (0,))), conditioning, t), abs=1e-11)


def test_potential_alignment(rng):
    for _ in range(5):
        g, _, _ = random_game(rng, int(rng.integers(2, 5)))
        for p, i, q in deviations(g):
            du = g.utility(i, q) - g.utility(i, p)
            assert du == pytest.approx(g.objective(q) - g.objective(p), abs=1e-9)


def test_approx_utility_uses_only_neighbors(rng):
    g, jg, noise = random_game(rng, 3)
    nm = NeighborMap(((1,), (0,), ()))
    p = (0, 0, 0)
    cov = noisy_full(jg, noise)
    t = list(range(len(jg.vars.sensing), len(jg.vars)))
    expect = oracle_cmi(cov, list(g.selection(p, (0,))), list(g.selection(p, (1,))), t)
    assert local_utility_approx(g, 0, p, nm) == pytest.approx(expect, abs=1e-11)
    assert local_utility_approx(g, 2, p, nm) == pytest.approx(g.engine.mi(g.selection(p, (2,))), abs=1e-12)


def test_error_term_difference_form_and_cross_check(rng):
    """U~ - U changes between two actions exactly as minus the error term does."""
    for _ in range(5):
        g, _, _ = random_game(rng, 4, max_actions=3)
        nm = NeighborMap(((1,), (0, 2), (3,), ()))
        ga = g.with_neighbors(nm)
        for p, i, q in deviations(g):
            d_approx = ga.utility(i, q) - ga.utility(i, p)
            d_full = g.utility(i, q) - g.utility(i, p)
            t_q = approx_error_term(g, i, p, nm, q[i])
            t_p = approx_error_term(g, i, p, nm, p[i])
            assert d_approx - d_full == pytest.approx(-(t_q - t_p), abs=1e-9)
            m_q = approx_error_measurement_term(g, i, p, nm, q[i])
            m_p = approx_error_measurement_term(g, i, p, nm, p[i])
            assert m_q - m_p == pytest.approx(d_approx - d_full, abs=1e-9)


def test_potentiality_gap_sign(rng):
    g, _, _ = random_game(rng, 3)
    nm = NeighborMap(((1,), (), ()))
    p = (0, 0, 0)
    ga = g.with_neighbors(nm)
    q = (1,) + p[1:]
    gap = potentiality_gap(g, 0, 1, 0, p, nm)
    assert ga.utility(0, q) - ga.utility(0, p) == pytest.approx(g.objective(q) - g.objective(p) - gap, abs=1e-12)
    assert potentiality_gap(g, 0, 1, 1, p, nm) == 0.0


def test_complete_neighbors_give_zero_error(rng):
    g, _, _ = random_game(rng, 3)
    nm = NeighborMap.complete(3)
    assert lemma1_delta(g, nm) == 0.0
    rep = theorem1_check(g, nm)
    assert rep.delta_u == pytest.approx(0.0, abs=1e-12)
    assert set(rep.nash_full) == set(rep.nash_approx)


def brute_force_nash(table):
    n = table.shape[0]
    out = []
    for p in itertools.product(*(range(s) for s in table.shape[1:])):
        ok = True
        for i in range(n):
            for a in range(table.shape[1 + i]):
                q = p[:i] + (a,) + p[i + 1:]
                if table[(i, *q)] > table[(i, *p)] + 1e-12:
                    ok = False
        if ok:
            out.append(p)
    return out


def test_equilibria_from_table_matches_brute_force(rng):
    for _ in range(20):
        shape = tuple(int(s) for s in rng.integers(1, 4, size=3))
        table = rng.integers(0, 4, size=(3, *shape)).astype(float)
        assert equilibria_from_table(table) == brute_force_nash(table)


def test_potential_maximizer_is_nash(rng):
    g, _, _ = random_game(rng, 3)
    obj = g.objective_table()
    best = tuple(int(k) for k in np.unravel_index(np.argmax(obj), obj.shape))
    ok, gain = is_epsilon_equilibrium(g, best, 0.0)
    assert ok and gain <= 1e-12
    assert best in pure_nash_equilibria(g)
    with pytest.raises(ValueError):
        is_epsilon_equilibrium(g, best, -1.0)


def test_epsilon_equilibrium_gain_matches_manual(rng):
    g, _, _ = random_game(rng, 2)
    p = (0, 0)
    manual = max(max(g.utilities(i, p)) - g.utility(i, p) for i in range(2))
    ok, gain = is_epsilon_equilibrium(g, p, eps=manual)
    assert ok and gain == pytest.approx(manual, abs=1e-15)
    if manual > 1e-9:
        assert not is_epsilon_equilibrium(g, p, eps=manual / 2)[0]


def test_equilibrium_closeness_no_violations(rng):
    for _ in range(5):
        g, _, _ = random_game(rng, 3)
        for nm in (NeighborMap.empty(3), NeighborMap(((1,), (2,), (0,)))):
            rep = theorem1_check(g, nm)
            assert rep.ok, rep.violations


def test_closeness_delta_against_manual(rng):
    g, _, _ = random_game(rng, 3)
    nm = NeighborMap.empty(3)
    full = g.utility_table()
    approx = g.with_neighbors(nm).utility_table()
    assert theorem1_check(g, nm).delta_u == pytest.approx(np.abs(full - approx).max(), abs=1e-15)


def test_corollary_containment_when_margin_holds():
    # each player's informative point sees its own target component, so the
    # players barely interact and the margin condition is easy to meet
    m = 6
    prior = np.eye(m) + 0.01 * np.ones((m, m))
    w = np.zeros(m)
    w[[0, 2, 4]] = [0.9, 0.5, 0.7]
    post = prior - np.diag(w**2 / 2.0)
    eng = GaussianEngine(prior, post, 0.1)
    g = SensorGame(eng, (((0,), (1,)), ((2,), (3,)), ((4,), (5,))))
    nm = NeighborMap.empty(3)
    rep = corollary1_condition(g, nm, delta="theorem1")
    assert rep.holds and rep.contained and not rep.missing
    loose = corollary1_condition(g, nm, delta="lemma1")
    assert loose.delta_u >= 0.0 and loose.min_margin == pytest.approx(rep.min_margin)
    with pytest.raises(ValueError):
        corollary1_condition(g, nm, delta="other")


def test_corollary_reports_when_margin_fails(rng):
    g, _, _ = random_game(rng, 3)
    rep = corollary1_condition(g, NeighborMap.empty(3))
    if not rep.holds:
        assert rep.contained is None
    assert rep.min_margin >= 0.0
