import math

import numpy as np
import pytest

from oracles import brute_force, brute_poa, random_game
from robusttoll.equilibrium import poa
from robusttoll.game import BasisSet
from robusttoll.robust import (
    build_index,
    build_lp,
    construct_worst_case_game,
    label_resources,
    solve_robust_poa,
    verify_worst_case,
)
from robusttoll.tolls import TollMechanismSpec, design


def zeros(n, m=2):
    return np.zeros((m, n + 1))


def test_index_sizes():
    idx = build_index(1, 1)
    assert {tuple(e) for e in idx.entries} == {(1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0)}
    assert len(build_index(2, 1)) == 9
    assert len(build_index(15, 2)) == 1630
    for n, m in [(3, 1), (4, 2), (6, 3)]:
        idx = build_index(n, m)
        assert len(idx) == m * (math.comb(n + 3, 3) - 1)
        keys = [tuple(e) for e in idx.entries]
        assert keys == sorted(set(keys))


def test_label_coefficients():
    n = 4
    b = BasisSet.affine(n)
    inst = build_lp(b, zeros(n), n, 0.0)
    entries = [tuple(e) for e in inst.index.entries]
    for j in range(2):
        k = entries.index((0, n, 0, j))
        assert inst.ne_theta[k] == n * b.values[j, n] and inst.objective[k] == 0
        k = entries.index((2, 0, 0, j))
        assert inst.ne_theta[k] == 0 and inst.ne_theta_hat[k] == 0
        k = entries.index((0, 0, n, j))
        assert inst.normalization[k] == 0


def test_constant_basis_has_poa_one(rng):
    for n in (1, 3, 6):
        assert solve_robust_poa(BasisSet.polynomial((0,), n).values, zeros(n, 1), n, 0.0).poa == pytest.approx(1.0)
    for _ in range(20):
        g = random_game(rng, degrees=(0,))
        assert brute_poa(g) == pytest.approx(1.0)


def test_affine_asymptote():
    assert solve_robust_poa(BasisSet.affine(20).values, zeros(20), 20, 0.0).poa == pytest.approx(2.5, abs=0.05)


def test_delta_monotone_and_full_form_agree():
    n = 4
    b = BasisSet.affine(n)
    T = design(b, TollMechanismSpec("marginal_cost")).toll_bases
    p = [solve_robust_poa(b.values, T, n, d).p_star for d in (0.0, 0.1, 0.2)]
    assert p[2] <= p[1] + 1e-12 <= p[0] + 2e-12
    for d in (0.0, 0.1, 0.3):
        red = solve_robust_poa(b.values, T, n, d).p_star
        full = solve_robust_poa(b.values, T, n, d, method="full").p_star
        assert red == pytest.approx(full, abs=1e-9)


def test_scale_invariance():
    n = 5
    b = BasisSet.affine(n)
    T = design(b, TollMechanismSpec("marginal_cost")).toll_bases
    a = solve_robust_poa(b.values, T, n, 0.2).poa
    c = solve_robust_poa(3.0 * b.values, 3.0 * T, n, 0.2).poa
    assert a == pytest.approx(c, rel=1e-9)


def test_label_resources(game_x):
    assert label_resources(game_x, (0, 1), (1, 0)).tolist() == [[0, 1, 1], [0, 1, 1]]
    same = label_resources(game_x, (0, 0), (0, 0))
    assert same.tolist() == [[2, 0, 0], [0, 0, 0]]


def _single_label(n, label, m=1):
    idx = build_index(n, m)
    theta = np.zeros(len(idx))
    theta[[tuple(e) for e in idx.entries].index(label)] = 1.0
    return theta


def test_ring_construction_single_label():
    n = 2
    b = BasisSet.polynomial((1,), n)
    theta = _single_label(n, (0, 1, 1, 0))
    w = construct_worst_case_game(theta, theta, b, zeros(n, 1), n)
    assert w.game.n_resources == 2
    assert w.game.action_sets[0] == (frozenset({0}), frozenset({1}))
    assert w.game.action_sets[1] == (frozenset({1}), frozenset({0}))
    assert label_resources(w.game, w.a_ne, w.a_opt).tolist() == [[0, 1, 1], [0, 1, 1]]


def test_ring_construction_same_bundles():
    n = 3
    b = BasisSet.polynomial((1,), n)
    w = construct_worst_case_game(*(2 * (_single_label(n, (1, 0, 0, 0)),)), b, zeros(n, 1), n)
    for A in w.game.action_sets:
        assert A[0] == A[1]


def test_worst_case_end_to_end():
    n = 2
    b = BasisSet.affine(n)
    res = solve_robust_poa(b.values, zeros(n), n, 0.0)
    w = construct_worst_case_game(res.theta, res.theta_hat, b, zeros(n), n)
    rep = verify_worst_case(w)
    assert rep.passed, rep.messages()
    assert poa(w.game, w.tolls).poa == pytest.approx(res.poa, abs=1e-4)


def test_worst_case_band_per_resource():
    n = 3
    b = BasisSet.affine(n)
    T = design(b, TollMechanismSpec("marginal_cost")).toll_bases
    res = solve_robust_poa(b.values, T, n, 0.25)
    w = construct_worst_case_game(res.theta, res.theta_hat, b, T, n, delta=0.25)
    g, gt = w.game.gamma, w.tolls.gamma_tilde
    assert np.all(np.abs(gt - g) <= 0.25 * g + 1e-12)
    assert verify_worst_case(w).passed


def test_verify_detects_broken_inputs():
    n = 2
    b = BasisSet.affine(n)
    res = solve_robust_poa(b.values, zeros(n), n, 0.0)
    doubled = construct_worst_case_game(2 * res.theta, 2 * res.theta_hat, b, zeros(n), n)
    rep = verify_worst_case(doubled)
    assert not rep.ne_cost_ok and rep.ne_cost == pytest.approx(2.0)
    # a resource used only at equilibrium: deviating to the empty optimum bundle is free
    bad = _single_label(n, (0, 1, 0, 0), m=2)
    rep = verify_worst_case(construct_worst_case_game(bad, bad, b, zeros(n), n))
    assert not rep.nash_ok and rep.violation is not None
    with pytest.raises(ValueError):
        construct_worst_case_game(res.theta, 2 * res.theta_hat + 1, b, zeros(n), n, delta=0.1)


def test_brute_force_never_exceeds_bound(rng):
    bound = solve_robust_poa(BasisSet.affine(3).values, zeros(3), 3, 0.0).poa
    for _ in range(30):
        g = random_game(rng, max_agents=3)
        ne, _ = brute_force(g)
        assert brute_poa(g) <= bound + 1e-9
