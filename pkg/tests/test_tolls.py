import numpy as np
import pytest

from oracles import brute_force, random_game
from robusttoll.equilibrium import enumerate_nash, poa
from robusttoll.game import BasisSet, Game
from robusttoll.robust import solve_robust_poa
from robusttoll.tolls import (
    TollMechanismSpec,
    build_deployed_tolls,
    certify_epsilon,
    design,
    lambda_scale,
    marginal_cost_toll,
    optimal_constant_toll,
    optimal_local_toll,
)


def test_marginal_cost_examples():
    k = np.arange(6.0)
    assert marginal_cost_toll(k)[1:].tolist() == [0, 1, 2, 3, 4]
    assert np.all(marginal_cost_toll(np.r_[0, np.ones(5)]) == 0)
    assert marginal_cost_toll(k ** 4)[2] == 15


def test_lambda_scale():
    b = np.arange(5.0)
    T = marginal_cost_toll(b)
    assert np.array_equal(lambda_scale(T, b, 1.0), T)
    assert np.array_equal(lambda_scale(T, b, 0.0), -b)
    assert lambda_scale(T, b, 2.0)[2] == 4.0


def test_optimal_local_constant_basis():
    f, p = optimal_local_toll(np.r_[0, np.ones(5)])
    assert np.allclose(f, 0) and p == pytest.approx(1.0)
    f, p = optimal_constant_toll(np.r_[0, np.ones(5)])
    assert np.allclose(f, 0) and p == pytest.approx(1.0)


def test_affine_n20_ordering():
    n = 20
    k = np.arange(n + 1.0)
    _, p_opt = optimal_local_toll(k)
    p_mc = solve_robust_poa(k[None, :], marginal_cost_toll(k)[None, :], n, 0.0).poa
    p_zero = solve_robust_poa(k[None, :], np.zeros((1, n + 1)), n, 0.0).poa
    assert p_opt < p_mc
    assert p_opt < p_zero
    _, p_const = optimal_constant_toll(k)
    assert p_const >= p_opt - 1e-9


@pytest.mark.xfail(strict=True, reason="marginal-cost tolls give 3.0 > 2.5 on affine costs; see notes")
def test_marginal_cost_beats_untolled_affine():
    n = 20
    k = np.arange(n + 1.0)
    assert solve_robust_poa(k[None, :], marginal_cost_toll(k)[None, :], n, 0.0).poa < 2.5


def test_single_agent_any_toll_gives_poa_one(rng):
    for _ in range(20):
        g = random_game(rng, max_agents=1)
        for kind in ("zero", "marginal_cost", "optimal_local", "optimal_constant"):
            assert poa(g, build_deployed_tolls(g, TollMechanismSpec(kind))).poa == pytest.approx(1.0)
    for f in (optimal_local_toll, optimal_constant_toll):
        assert f(np.array([0.0, 1.0]))[1] == pytest.approx(1.0)


@pytest.mark.parametrize("degrees", [(0, 1), (0, 4)])
@pytest.mark.parametrize("n", [2, 5, 8])
@pytest.mark.parametrize("neg", [False, True])
@pytest.mark.parametrize("kind", ["optimal_local", "optimal_constant"])
def test_design_self_consistency(degrees, n, neg, kind):
    b = BasisSet.polynomial(degrees, n)
    d = design(b, TollMechanismSpec(kind, allow_negative=neg))
    check = solve_robust_poa(b.values, d.toll_bases, n, 0.0).poa
    assert check == pytest.approx(d.nominal_poa, rel=1e-6)
    if not neg:
        assert np.all(d.toll_bases >= 0)
    if kind == "optimal_constant":
        assert np.allclose(d.toll_bases[:, 1:], d.toll_bases[:, 1:2])


def test_nonnegative_design_is_smallest_nonsubsidising():
    b = BasisSet.affine(8)
    d = design(b, TollMechanismSpec("optimal_local"))
    # shrinking lambda below one makes some toll negative
    assert np.any(lambda_scale(d.toll_bases, b.values, 0.99) < 0)


def test_build_deployed_tolls(game_y):
    z = build_deployed_tolls(game_y, TollMechanismSpec("zero"), gamma_tilde=[[5, 5], [5, 5]])
    assert np.all(z.table() == 0)
    t = build_deployed_tolls(game_y, TollMechanismSpec("marginal_cost"))
    assert t.table()[1, 2] == pytest.approx(0.5)
    gt = game_y.gamma.copy()
    gt[1, 1] *= 1.2
    t = build_deployed_tolls(game_y, TollMechanismSpec("marginal_cost"), gamma_tilde=gt)
    assert t.table()[1, 2] == pytest.approx(0.6)


def test_certificate_zero_tolls_is_infinite(game_x, game_y):
    for g in (game_x, game_y):
        c = certify_epsilon(g, TollMechanismSpec("zero"))
        assert c.epsilon == np.inf and c.witness is None


def test_certificate_game_y(game_y, rng):
    spec = TollMechanismSpec("marginal_cost")
    c = certify_epsilon(game_y, spec)
    assert c.epsilon == pytest.approx(0.5)
    assert c.delta == pytest.approx(0.5 / game_y.gamma.max())
    assert c.delta_relative >= c.delta
    assert c.witness["allocation"] == (1, 1)
    base = enumerate_nash(game_y, build_deployed_tolls(game_y, spec))
    for _ in range(1000):
        gt = np.clip(game_y.gamma + rng.uniform(-c.epsilon, c.epsilon, game_y.gamma.shape), 0, None)
        assert enumerate_nash(game_y, build_deployed_tolls(game_y, spec, gt)).issubset(base)
    # relative band
    for _ in range(300):
        gt = game_y.gamma * (1 + rng.uniform(-c.delta_relative, c.delta_relative, game_y.gamma.shape))
        assert enumerate_nash(game_y, build_deployed_tolls(game_y, spec, gt)).issubset(base)


def test_certificate_is_not_claimed_tight(game_y, rng):
    # beyond the radius new equilibria may appear; only record that it can happen here
    spec = TollMechanismSpec("marginal_cost")
    c = certify_epsilon(game_y, spec)
    base = enumerate_nash(game_y, build_deployed_tolls(game_y, spec))
    outside = 0
    for _ in range(200):
        gt = np.clip(game_y.gamma + rng.uniform(-2 * c.epsilon, 2 * c.epsilon, (2, 2)), 0, None)
        outside += not enumerate_nash(game_y, build_deployed_tolls(game_y, spec, gt)).issubset(base)
    assert outside > 0


def test_certificate_matches_oracle_on_random_games(rng):
    for _ in range(15):
        g = random_game(rng, max_agents=3, min_agents=2)
        spec = TollMechanismSpec("marginal_cost")
        c = certify_epsilon(g, spec)
        TB = design(g.basis, spec).toll_bases
        base = set(brute_force(g, TB)[0])
        r = c.epsilon if np.isfinite(c.epsilon) else 5.0
        for _ in range(50):
            gt = np.clip(g.gamma + rng.uniform(-r, r, g.gamma.shape), 0, None)
            assert set(brute_force(g, TB, gt)[0]) <= base


def test_certificate_cap():
    g = Game([[{0}, {1}], [{0}, {1}, {0, 1}]], np.ones((2, 2)), BasisSet.affine(2))
    with pytest.raises(Exception, match="too large"):
        certify_epsilon(g, TollMechanismSpec("marginal_cost"), cap=2)
