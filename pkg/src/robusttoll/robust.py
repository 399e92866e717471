"""Worst-case price of anarchy under relative misspecification of toll inputs.

Each resource of a game is summarised by a label ``(x, y, z)``: ``x`` agents
use it in both the equilibrium and the optimum, ``y`` only in the
equilibrium and ``z`` only in the optimum. The worst-case ratio over all
games with at most ``n`` agents and costs in the span of a basis is
``1 / p_star`` where ``p_star`` solves

    min   sum (x+z) b_j(x+z) theta
    s.t.  sum (x+y) b_j(x+y) theta = 1
          sum [y b_j(x+y) - z b_j(x+y+1)] theta
            + [y t_j(x+y) - z t_j(x+y+1)] theta_hat <= 0
          (1-delta) theta <= theta_hat <= (1+delta) theta,   theta >= 0

with ``t_j`` the toll bases. ``theta_hat`` only enters the aggregated
equilibrium row, so it can be eliminated: each coefficient is replaced by
its most favourable value over the box. That leaves a two-row LP.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lp
from .equilibrium import TIE_TOL, _best_deviation
from .game import Allocation, BasisSet, DeployedTolls, Game, composite_table, system_cost

PRUNE_TOL = 1e-9


class RobustLpError(RuntimeError):
    pass


def _table(values, n):
    v = values.values if isinstance(values, BasisSet) else np.atleast_2d(np.asarray(values, dtype=float))
    if v.shape[1] < n + 1:
        raise ValueError(f"tables cover loads up to {v.shape[1] - 1}, need {n}")
    v = np.array(v[:, : n + 1], dtype=float)
    v[:, 0] = 0.0
    return v


def triples(n: int) -> np.ndarray:
    """All ``(x, y, z) >= 0`` with ``1 <= x+y+z <= n``, lexicographic."""
    out = [(x, y, z) for x in range(n + 1) for y in range(n + 1 - x) for z in range(n + 1 - x - y)
           if x + y + z >= 1]
    return np.array(out, dtype=np.int64).reshape(-1, 3)


@dataclass(frozen=True)
class LabelIndex:
    """Rows ``(x, y, z, j)`` with ``j`` zero-based, ordered by ``(x, y, z, j)``."""

    n: int
    m: int
    entries: np.ndarray

    def __len__(self):
        return self.entries.shape[0]

    @property
    def x(self):
        return self.entries[:, 0]

    @property
    def y(self):
        return self.entries[:, 1]

    @property
    def z(self):
        return self.entries[:, 2]

    @property
    def j(self):
        return self.entries[:, 3]


def build_index(n: int, m: int) -> LabelIndex:
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 and m >= 1")
    t = triples(n)
    K = t.shape[0]
    entries = np.empty((K * m, 4), dtype=np.int64)
    entries[:, :3] = np.repeat(t, m, axis=0)
    entries[:, 3] = np.tile(np.arange(m), K)
    entries.setflags(write=False)
    return LabelIndex(n, m, entries)


def label_coefficients(table: np.ndarray, x, y, z):
    """Objective, normalisation and NE-row coefficients for one basis table.

    ``table`` is indexed by load; entries at ``x+y+1`` are only read where
    ``z > 0``, which keeps the index within ``0..n``.
    """
    obj = (x + z) * table[x + z]
    norm = (x + y) * table[x + y]
    up = np.where(z > 0, x + y + 1, 0)
    ne = y * table[x + y] - np.where(z > 0, z * table[up], 0.0)
    return obj, norm, ne


@dataclass(frozen=True)
class RobustLpInstance:
    delta: float
    index: LabelIndex
    objective: np.ndarray
    normalization: np.ndarray
    ne_theta: np.ndarray
    ne_theta_hat: np.ndarray

    @property
    def size(self):
        return len(self.index)

    def full_problem(self) -> lp.LpProblem:
        """The LP over ``(theta, theta_hat)`` with explicit box rows."""
        K = self.size
        d = self.delta
        I = np.eye(K)
        A_ub = np.vstack([
            np.concatenate([self.ne_theta, self.ne_theta_hat])[None, :],
            np.hstack([-(1 + d) * I, I]),
            np.hstack([(1 - d) * I, -I]),
        ])
        b_ub = np.zeros(A_ub.shape[0])
        c = np.concatenate([self.objective, np.zeros(K)])
        A_eq = np.concatenate([self.normalization, np.zeros(K)])[None, :]
        return lp.LpProblem(c, A_eq, [1.0], A_ub, b_ub)

    def reduced_ne_row(self) -> np.ndarray:
        g = self.ne_theta_hat
        return self.ne_theta + g - self.delta * np.abs(g)

    def reduced_problem(self) -> lp.LpProblem:
        """The same LP with ``theta_hat`` eliminated (two rows)."""
        return lp.LpProblem(self.objective, self.normalization[None, :], [1.0],
                            self.reduced_ne_row()[None, :], [0.0])

    def theta_hat_for(self, theta: np.ndarray) -> np.ndarray:
        """Box-extreme ``theta_hat`` that makes the NE row smallest for ``theta``."""
        return theta * (1.0 - self.delta * np.sign(self.ne_theta_hat))


def build_lp(basis, toll_bases, n: int, delta: float) -> RobustLpInstance:
    if delta < 0:
        raise ValueError("delta must be non-negative")
    b = _table(basis, n)
    t = _table(toll_bases, n)
    if b.shape[0] != t.shape[0]:
        raise ValueError("one toll basis per cost basis")
    idx = build_index(n, b.shape[0])
    x, y, z, j = idx.x, idx.y, idx.z, idx.j
    obj = np.empty(len(idx))
    norm = np.empty(len(idx))
    ne_t = np.empty(len(idx))
    ne_h = np.empty(len(idx))
    for jj in range(b.shape[0]):
        sel = j == jj
        o, d, g = label_coefficients(b[jj], x[sel], y[sel], z[sel])
        _, _, h = label_coefficients(t[jj], x[sel], y[sel], z[sel])
        obj[sel], norm[sel], ne_t[sel], ne_h[sel] = o, d, g, h
    return RobustLpInstance(float(delta), idx, obj, norm, ne_t, ne_h)


@dataclass(frozen=True)
class RobustPoaResult:
    p_star: float
    poa: float
    theta: np.ndarray
    theta_hat: np.ndarray
    instance: RobustLpInstance


def solve_robust_poa(basis, toll_bases, n: int, delta: float, method: str = "reduced") -> RobustPoaResult:
    """Solve the robust-PoA LP; ``poa = 1 / p_star`` (``inf`` when ``p_star = 0``)."""
    inst = build_lp(basis, toll_bases, n, delta)
    K = inst.size
    if method == "reduced":
        sol = lp.solve(inst.reduced_problem())
    elif method == "full":
        sol = lp.solve(inst.full_problem())
    else:
        raise ValueError(f"unknown method {method!r}")
    if not sol.ok:
        raise RobustLpError(f"robust PoA LP is {sol.status} (n={n}, delta={delta})")
    if method == "reduced":
        theta = sol.x
        theta_hat = inst.theta_hat_for(theta)
    else:
        theta, theta_hat = sol.x[:K], sol.x[K:]
    p_star = max(float(sol.value), 0.0)
    return RobustPoaResult(p_star, 1.0 / p_star if p_star > 0 else np.inf, theta, theta_hat, inst)


def label_resources(game: Game, a_ne: Allocation, a_opt: Allocation) -> np.ndarray:
    """Per-resource counts ``(x_e, y_e, z_e)``, shape ``(|E|, 3)``."""
    ne = game.bundles(a_ne)
    opt = game.bundles(a_opt)
    out = np.zeros((game.n_resources, 3), dtype=np.int64)
    for s_ne, s_opt in zip(ne, opt):
        for e in s_ne & s_opt:
            out[e, 0] += 1
        for e in s_ne - s_opt:
            out[e, 1] += 1
        for e in s_opt - s_ne:
            out[e, 2] += 1
    return out


@dataclass(frozen=True)
class WorstCaseGame:
    game: Game
    tolls: DeployedTolls
    a_ne: Allocation
    a_opt: Allocation
    labels: tuple  # (x, y, z, j) per retained label, j zero-based
    theta: np.ndarray
    theta_hat: np.ndarray
    p_star: float


def construct_worst_case_game(theta, theta_hat, basis: BasisSet, toll_bases, n: int,
                              prune_tol: float = PRUNE_TOL, delta: float | None = None) -> WorstCaseGame:
    """Build a game attaining the LP bound from an LP solution.

    Every retained label gets ``n`` resources on a ring. Agent ``i`` covers
    ring offsets ``i .. i+x+y-1`` in its equilibrium bundle and
    ``i+y .. i+y+x+z-1`` in its optimal bundle, so each ring resource keeps
    label ``(x, y, z)``. Ring resources carry ``theta/n`` of basis ``j`` and
    tolls built from ``theta_hat/n``.
    """
    theta = np.asarray(theta, dtype=float)
    theta_hat = np.asarray(theta_hat, dtype=float)
    b = _table(basis, n)
    m = b.shape[0]
    idx = build_index(n, m)
    if theta.shape != (len(idx),) or theta_hat.shape != (len(idx),):
        raise ValueError(f"theta vectors must have length {len(idx)}")
    if np.any(theta < -prune_tol) or np.any(theta_hat < -prune_tol):
        raise ValueError("theta and theta_hat must be non-negative")
    if delta is not None:
        slack = prune_tol * (1.0 + np.abs(theta))
        if np.any(theta_hat > (1 + delta) * theta + slack) or np.any(theta_hat < (1 - delta) * theta - slack):
            raise ValueError(f"theta_hat leaves the relative band of width {delta}")
    keep = np.flatnonzero(theta > prune_tol)
    if keep.size == 0:
        raise ValueError("no label carries positive mass")

    n_res = keep.size * n
    gamma = np.zeros((n_res, m))
    gamma_t = np.zeros((n_res, m))
    ne_bundles = [set() for _ in range(n)]
    opt_bundles = [set() for _ in range(n)]
    labels = []
    for r, k in enumerate(keep):
        x, y, z, j = (int(v) for v in idx.entries[k])
        labels.append((x, y, z, j))
        base = r * n
        gamma[base: base + n, j] = theta[k] / n
        gamma_t[base: base + n, j] = theta_hat[k] / n
        for i in range(n):
            ne_bundles[i].update(base + (i + s) % n for s in range(x + y))
            opt_bundles[i].update(base + (i + y + s) % n for s in range(x + z))
    full_basis = basis if isinstance(basis, BasisSet) else BasisSet(b)
    full_basis = full_basis.truncate(n)
    game = Game(tuple((frozenset(ne_bundles[i]), frozenset(opt_bundles[i])) for i in range(n)),
                gamma, full_basis)
    tolls = DeployedTolls(_table(toll_bases, n), gamma_t)
    p_star = float(build_lp(full_basis, tolls.toll_bases, n, 0.0).objective @ theta)
    return WorstCaseGame(game, tolls, (0,) * n, (1,) * n, tuple(labels), theta, theta_hat, p_star)


@dataclass(frozen=True)
class WorstCaseReport:
    nash_ok: bool
    violation: tuple | None  # (agent, action, gain) when the equilibrium check fails
    ne_cost: float
    ne_cost_ok: bool
    opt_cost: float
    ratio: float
    ratio_ok: bool

    @property
    def passed(self):
        return self.nash_ok and self.ne_cost_ok and self.ratio_ok

    def messages(self):
        out = []
        if not self.nash_ok:
            i, q, g = self.violation
            out.append(f"agent {i} gains {g:.3g} by switching to action {q}")
        if not self.ne_cost_ok:
            out.append(f"equilibrium cost {self.ne_cost:.6g} != 1 (normalisation row)")
        if not self.ratio_ok:
            out.append(f"opt/NE cost ratio {self.ratio:.6g} does not reproduce p*")
        return out


def verify_worst_case(wcg: WorstCaseGame, tol: float = 1e-7) -> WorstCaseReport:
    """Check that ``a_ne`` is an equilibrium with unit cost and ``cost(a_opt) = p*``.

    By rotational symmetry agent 0's deviation is representative; all agents
    are checked anyway since the game has only two actions per agent.
    """
    comp = composite_table(wcg.game, wcg.tolls)
    dev = _best_deviation(wcg.game, comp, wcg.a_ne, max(TIE_TOL, tol))
    ne_cost = system_cost(wcg.game, wcg.a_ne)
    opt_cost = system_cost(wcg.game, wcg.a_opt)
    ratio = opt_cost / ne_cost if ne_cost > 0 else np.inf
    return WorstCaseReport(
        nash_ok=dev is None,
        violation=dev,
        ne_cost=ne_cost,
        ne_cost_ok=abs(ne_cost - 1.0) <= tol,
        opt_cost=opt_cost,
        ratio=ratio,
        ratio_ok=abs(ratio - wcg.p_star) <= tol * (1.0 + abs(wcg.p_star)),
    )
