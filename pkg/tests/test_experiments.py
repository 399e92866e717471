import csv

import numpy as np
import pytest

from robusttoll.experiments import (
    FIG3_HEADER,
    MC_HEADER,
    PerturbationProtocol,
    run_monte_carlo,
    sweep_lambda,
    sweep_robust_poa,
    trial_rng,
    write_csv,
)
from robusttoll.equilibrium import enumerate_nash, poa
from robusttoll.io import load_game
from robusttoll.tolls import TollMechanismSpec, build_deployed_tolls, certify_epsilon


@pytest.fixture(scope="module")
def sioux():
    return load_game("sioux_falls_simplified")


def test_protocol_validation():
    with pytest.raises(ValueError):
        PerturbationProtocol(trials=0)
    with pytest.raises(ValueError):
        PerturbationProtocol((0.1, -0.1))


def test_trial_streams_are_independent_of_order():
    a = trial_rng(3, 1, 5).uniform(size=4)
    trial_rng(3, 0, 0).uniform(size=100)
    assert np.array_equal(a, trial_rng(3, 1, 5).uniform(size=4))
    assert not np.array_equal(a, trial_rng(3, 1, 6).uniform(size=4))


def test_workers_do_not_change_results(game_y):
    proto = PerturbationProtocol((0.2, 0.6, 1.0), trials=30, seed=11)
    spec = TollMechanismSpec("marginal_cost")
    one = run_monte_carlo(game_y, spec, proto, workers=1)
    two = run_monte_carlo(game_y, spec, proto, workers=2)
    assert one.rows == two.rows
    assert [r.trial_poa for r in one] == [r.trial_poa for r in two]


def test_below_certified_radius_nothing_new(game_y):
    spec = TollMechanismSpec("marginal_cost")
    r = certify_epsilon(game_y, spec).delta_relative
    s = run_monte_carlo(game_y, spec, PerturbationProtocol((0.5 * r, 0.99 * r), 200, 1))
    for row in s:
        assert row.frac_new_ne == 0
        assert row.max_poa == pytest.approx(s.noiseless_poa)


def test_trials_match_direct_evaluation(game_y):
    # each recorded trial must agree with a from-scratch equilibrium computation
    spec = TollMechanismSpec("marginal_cost")
    proto = PerturbationProtocol((0.8,), trials=25, seed=4)
    s = run_monte_carlo(game_y, spec, proto)
    base = enumerate_nash(game_y, build_deployed_tolls(game_y, spec)).as_set()
    from robusttoll.experiments import perturbed_gamma
    for t in range(proto.trials):
        gt = perturbed_gamma(game_y.gamma, 0.8, trial_rng(4, 0, t))
        tolls = build_deployed_tolls(game_y, spec, gt)
        assert s.rows[0].trial_poa[t] == pytest.approx(poa(game_y, tolls).poa)
        assert s.rows[0].trial_new_ne[t] == bool(enumerate_nash(game_y, tolls).as_set() - base)


def test_sioux_small_delta(sioux):
    s = run_monte_carlo(sioux, TollMechanismSpec("optimal_local"),
                        PerturbationProtocol((0.05,), trials=60, seed=7))
    row = s.rows[0]
    assert row.frac_new_ne == 0
    assert row.max_poa == row.avg_poa == pytest.approx(s.noiseless_poa)
    assert s.mode == "symmetric"


def test_sioux_trials_without_new_equilibria_do_not_worsen(sioux):
    s = run_monte_carlo(sioux, TollMechanismSpec("optimal_local"),
                        PerturbationProtocol((0.5,), trials=60, seed=7))
    row = s.rows[0]
    assert min(row.trial_poa) >= 1.0
    # a trial with no new equilibria keeps a subset of the old ones
    for p, new in zip(row.trial_poa, row.trial_new_ne):
        if not new:
            assert p <= s.noiseless_poa + 1e-12


@pytest.fixture(scope="module")
def mech_sweep():
    return sweep_robust_poa(n=8, allow_negative=True)


def _series(rows, mech):
    return [r["poa"] for r in rows if r["mechanism"] == mech]


def test_mechanism_sweep_columns_monotone(mech_sweep):
    for mech in ("marginal_cost", "optimal_local", "optimal_constant"):
        s = _series(mech_sweep, mech)
        assert all(b >= a - 1e-9 for a, b in zip(s, s[1:]))


def test_mechanism_sweep_nominal_ordering(mech_sweep):
    local, const, mc = (_series(mech_sweep, m)[0] for m in ("optimal_local", "optimal_constant", "marginal_cost"))
    assert local <= const + 1e-9
    assert local <= mc + 1e-9


def test_constant_overtakes_local(mech_sweep):
    assert _series(mech_sweep, "optimal_constant")[-1] < _series(mech_sweep, "optimal_local")[-1]


@pytest.mark.xfail(strict=True, reason="the non-negative local toll stays ahead of the constant toll; see notes")
def test_constant_overtakes_nonnegative_local():
    rows = sweep_robust_poa(("optimal_local", "optimal_constant"), n=8, deltas=(0.5,))
    assert rows[1]["poa"] < rows[0]["poa"]


def test_lambda_one_matches_base():
    lam = sweep_lambda((1.0,), (0.0, 0.25, 0.5), n=6)
    base = sweep_robust_poa(("optimal_local",), n=6, deltas=(0.0, 0.25, 0.5))
    assert [r["poa"] for r in lam] == pytest.approx([r["poa"] for r in base], rel=1e-9)


@pytest.mark.parametrize("allow_negative", [False, True])
def test_lambda_sweep_ordering(allow_negative):
    rows = sweep_lambda((0.25, 1.0, 4.0), (0.5,), n=8, allow_negative=allow_negative)
    p = {r["lambda"]: r["poa"] for r in rows}
    assert p[1.0] < p[4.0] < p[0.25]


def test_nominal_poa_unchanged_by_lambda():
    rows = sweep_lambda((0.5, 1.0, 2.0), (0.0,), n=5)
    vals = [r["poa"] for r in rows]
    assert max(vals) - min(vals) < 1e-6


def test_csv_output(tmp_path, game_y):
    s = run_monte_carlo(game_y, TollMechanismSpec("marginal_cost"), PerturbationProtocol((0.1,), 5))
    write_csv(tmp_path / "mc.csv", s.rows, MC_HEADER)
    write_csv(tmp_path / "f3.csv", sweep_lambda((0.0,), (0.0,), n=3), FIG3_HEADER)
    with open(tmp_path / "mc.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == MC_HEADER and len(rows) == 2
    with open(tmp_path / "f3.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == FIG3_HEADER and rows[1][2] == "inf"
