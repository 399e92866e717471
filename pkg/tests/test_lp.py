import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_bounded_lp, vertex_lp
from robusttoll import lp


def test_single_variable():
    s = lp.solve(lp.LpProblem([-1.0], A_ub=[[1.0]], b_ub=[5.0]))
    assert s.status == lp.OPTIMAL
    assert s.value == pytest.approx(-5.0)
    assert s.x == pytest.approx([5.0])


def test_degenerate_face():
    s = lp.solve(lp.LpProblem([1.0, 1.0], A_eq=[[1.0, 1.0]], b_eq=[1.0]))
    assert s.ok and s.value == pytest.approx(1.0)


def test_infeasible():
    s = lp.solve(lp.LpProblem([1.0], A_ub=[[1.0]], b_ub=[-1.0]))
    assert s.status == lp.INFEASIBLE


def test_unbounded():
    s = lp.solve(lp.LpProblem([-1.0, 0.0], A_ub=[[1.0, -1.0]], b_ub=[1.0]))
    assert s.status == lp.UNBOUNDED


def test_free_and_bounded_variables():
    # min x - y with -2 <= x <= 3 free-ish, y <= 4, x + y >= -1
    p = lp.LpProblem([1.0, -1.0], A_ub=[[-1.0, -1.0]], b_ub=[1.0], lb=[-2.0, -np.inf], ub=[3.0, 4.0])
    s = lp.solve(p)
    assert s.ok and s.value == pytest.approx(-6.0)
    assert s.x == pytest.approx([-2.0, 4.0])


def test_bad_dimensions():
    with pytest.raises(ValueError):
        lp.LpProblem([1.0, 2.0], A_ub=[[1.0]], b_ub=[1.0])
    with pytest.raises(ValueError):
        lp.LpProblem([np.nan])


def test_dump_is_plain_text():
    text = lp.LpProblem([1.0, 2.0], A_ub=[[1.0, 1.0]], b_ub=[3.0]).dump()
    assert "<=" in text and "3" in text


def test_determinism():
    rng = np.random.default_rng(5)
    c, A_ub, b_ub, _, _ = random_bounded_lp(rng, max_eq=0)
    p = lp.LpProblem(c, A_ub=A_ub, b_ub=b_ub)
    a, b = lp.solve(p), lp.solve(p)
    assert a.value == b.value and np.array_equal(a.x, b.x)


def test_iteration_cap_raises():
    rng = np.random.default_rng(9)
    c, A_ub, b_ub, _, _ = random_bounded_lp(rng, max_vars=6, max_ub=7, max_eq=0)
    p = lp.LpProblem(c, A_ub=A_ub, b_ub=b_ub)
    if lp.solve(p).iterations > 0:
        with pytest.raises(lp.SolverError):
            lp.solve(p, max_iter=0)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_oracle_agreement_and_duality(seed):
    rng = np.random.default_rng(seed)
    c, A_ub, b_ub, A_eq, b_eq = random_bounded_lp(rng)
    eq = len(A_eq) > 0
    p = lp.LpProblem(c, A_eq=A_eq if eq else None, b_eq=b_eq if eq else None, A_ub=A_ub, b_ub=b_ub)
    s = lp.solve(p)
    want, _ = vertex_lp(c, A_ub, b_ub, A_eq, b_eq)
    assert s.ok
    assert s.value == pytest.approx(want, abs=1e-6)
    # primal feasibility, objective consistency and strong duality
    assert np.all(A_ub @ s.x <= b_ub + 1e-8 * (1 + np.abs(b_ub)))
    if eq:
        assert np.allclose(A_eq @ s.x, b_eq, atol=1e-8)
    assert np.all(s.x >= -1e-8)
    assert c @ s.x == pytest.approx(s.value, abs=1e-9)
    assert abs(s.value - s.dual_value(p)) <= 1e-7 * (1 + abs(s.value))
    assert np.all(s.dual_ub <= 1e-9)


def test_matches_highs():
    scipy_opt = pytest.importorskip("scipy.optimize")
    rng = np.random.default_rng(11)
    for _ in range(50):
        c, A_ub, b_ub, A_eq, b_eq = random_bounded_lp(rng, max_vars=10, max_ub=10)
        eq = len(A_eq) > 0
        ref = scipy_opt.linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq if eq else None,
                                b_eq=b_eq if eq else None, method="highs")
        got = lp.solve(lp.LpProblem(c, A_eq=A_eq if eq else None, b_eq=b_eq if eq else None,
                                    A_ub=A_ub, b_ub=b_ub))
        assert got.value == pytest.approx(ref.fun, abs=1e-7)
