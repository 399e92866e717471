"""Atomic congestion games with basis-parameterised costs and linear tolls.

Every cost or toll function is a table indexed by load ``k = 0..n``; the
``k = 0`` column is identically zero so that terms with zero users vanish.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

Bundle = frozenset
Allocation = tuple


class GameError(ValueError):
    """Structural problem with a game, allocation or toll object."""


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BasisSet:
    """Basis cost functions ``b_j`` tabulated on loads ``0..n``.

    ``values[j, k]`` is ``b_j(k)``; ``values[:, 0]`` is forced to zero.
    """

    values: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        v = np.atleast_2d(np.array(self.values, dtype=float))
        if v.shape[1] < 2:
            raise GameError("basis tables need at least loads 0 and 1")
        v[:, 0] = 0.0
        if not np.all(np.isfinite(v)):
            raise GameError("basis values must be finite")
        if np.any(v[:, 1:] < 0):
            raise GameError("basis functions must be non-negative")
        if np.any(np.diff(v[:, 1:], axis=1) < 0):
            raise GameError("basis functions must be non-decreasing")
        names = tuple(self.names) or tuple(f"b{j + 1}" for j in range(v.shape[0]))
        if len(names) != v.shape[0]:
            raise GameError("one name per basis function")
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.values.shape[1] - 1

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_functions(cls, funcs: Sequence[Callable[[int], float]], n: int, names=()):
        table = [[0.0] + [float(f(k)) for k in range(1, n + 1)] for f in funcs]
        return cls(np.array(table), tuple(names))

    @classmethod
    def polynomial(cls, degrees: Sequence[int], n: int):
        """Monomials ``k**d`` for each degree, e.g. ``(0, 1)`` for affine costs."""
        k = np.arange(n + 1, dtype=float)
        table = np.array([k ** d for d in degrees])
        names = tuple("const" if d == 0 else f"poly:{d}" for d in degrees)
        return cls(table, names)

    @classmethod
    def affine(cls, n: int):
        return cls.polynomial((0, 1), n)

    @classmethod
    def bpr_quartic(cls, n: int):
        return cls.polynomial((0, 4), n)

    def subset(self, j: int) -> "BasisSet":
        return BasisSet(self.values[j: j + 1], (self.names[j],))

    def truncate(self, n: int) -> "BasisSet":
        if n > self.n:
            raise GameError(f"cannot extend basis from n={self.n} to n={n}")
        return BasisSet(self.values[:, : n + 1], self.names)


@dataclass(frozen=True)
class Game:
    """A congestion game ``G(gamma)``.

    ``action_sets[i]`` lists agent ``i``'s bundles (frozensets of resource
    indices); ``gamma`` has shape ``(n_resources, basis.m)``.
    """

    action_sets: tuple
    gamma: np.ndarray
    basis: BasisSet

    def __post_init__(self):
        gamma = np.atleast_2d(np.array(self.gamma, dtype=float))
        if gamma.ndim != 2 or gamma.shape[1] != self.basis.m:
            raise GameError(f"gamma must have shape (|E|, {self.basis.m}), got {gamma.shape}")
        if np.any(gamma < 0) or not np.all(np.isfinite(gamma)):
            raise GameError("gamma entries must be finite and non-negative")
        n_res = gamma.shape[0]
        sets = tuple(tuple(frozenset(int(e) for e in bundle) for bundle in A) for A in self.action_sets)
        if not sets:
            raise GameError("a game needs at least one agent")
        for i, A in enumerate(sets):
            if not A:
                raise GameError(f"agent {i} has an empty action set")
            for bundle in A:
                if any(e < 0 or e >= n_res for e in bundle):
                    raise GameError(f"agent {i} has a bundle outside the resource set: {sorted(bundle)}")
        if len(sets) > self.basis.n:
            raise GameError(f"{len(sets)} agents but basis tabulated only up to n={self.basis.n}")
        object.__setattr__(self, "action_sets", sets)
        object.__setattr__(self, "gamma", _frozen(gamma))

    @property
    def n_agents(self) -> int:
        return len(self.action_sets)

    @property
    def n_resources(self) -> int:
        return self.gamma.shape[0]

    @property
    def is_symmetric(self) -> bool:
        first = self.action_sets[0]
        return all(A == first for A in self.action_sets[1:])

    @property
    def n_allocations(self) -> int:
        return int(np.prod([len(A) for A in self.action_sets], dtype=object))

    def latency_table(self) -> np.ndarray:
        """``ell_e(k)`` for all resources and loads, shape ``(|E|, n+1)``."""
        return self.gamma @ self.basis.values

    def with_gamma(self, gamma) -> "Game":
        return Game(self.action_sets, gamma, self.basis)

    def incidence(self, i: int) -> np.ndarray:
        """Boolean matrix (actions x resources) for agent ``i``."""
        inc = np.zeros((len(self.action_sets[i]), self.n_resources), dtype=bool)
        for q, bundle in enumerate(self.action_sets[i]):
            inc[q, list(bundle)] = True
        return inc

    def bundles(self, a: Allocation) -> list:
        check_allocation(self, a)
        return [self.action_sets[i][q] for i, q in enumerate(a)]


@dataclass(frozen=True)
class DeployedTolls:
    """Toll bases ``tau_j*`` on loads ``0..n`` and deployed coefficients ``gamma_tilde``."""

    toll_bases: np.ndarray
    gamma_tilde: np.ndarray

    def __post_init__(self):
        tb = np.atleast_2d(np.array(self.toll_bases, dtype=float))
        tb[:, 0] = 0.0
        gt = np.atleast_2d(np.array(self.gamma_tilde, dtype=float))
        if gt.shape[1] != tb.shape[0]:
            raise GameError(f"gamma_tilde has {gt.shape[1]} columns for {tb.shape[0]} toll bases")
        if not (np.all(np.isfinite(tb)) and np.all(np.isfinite(gt))):
            raise GameError("toll data must be finite")
        object.__setattr__(self, "toll_bases", _frozen(tb))
        object.__setattr__(self, "gamma_tilde", _frozen(gt))

    @classmethod
    def zero(cls, game: Game) -> "DeployedTolls":
        return cls(np.zeros_like(game.basis.values), game.gamma)

    def table(self) -> np.ndarray:
        """``tau_e(k)`` for all resources and loads."""
        return self.gamma_tilde @ self.toll_bases

    def check_matches(self, game: Game):
        if self.toll_bases.shape != game.basis.values.shape:
            raise GameError(f"toll bases shape {self.toll_bases.shape} != basis shape {game.basis.values.shape}")
        if self.gamma_tilde.shape != game.gamma.shape:
            raise GameError(f"gamma_tilde shape {self.gamma_tilde.shape} != gamma shape {game.gamma.shape}")


def check_allocation(game: Game, a: Allocation):
    if len(a) != game.n_agents:
        raise GameError(f"allocation has {len(a)} entries for {game.n_agents} agents")
    for i, q in enumerate(a):
        if not (0 <= int(q) < len(game.action_sets[i])):
            raise GameError(f"agent {i} has no action {q}")


def load_profile(game: Game, a: Allocation) -> np.ndarray:
    """Number of agents on each resource under ``a``."""
    counts = np.zeros(game.n_resources, dtype=int)
    for bundle in game.bundles(a):
        counts[list(bundle)] += 1
    return counts


def _eval(table_row, k, n):
    if k < 0 or k > n:
        raise GameError(f"load {k} outside 0..{n}")
    return float(table_row[k])


def resource_cost(game: Game, e: int, k: int) -> float:
    """``ell_e(k) = sum_j gamma[e, j] * b_j(k)``; zero at ``k = 0``."""
    return _eval(game.gamma[e] @ game.basis.values, k, game.basis.n)


def toll_value(tolls: DeployedTolls, e: int, k: int) -> float:
    return _eval(tolls.gamma_tilde[e] @ tolls.toll_bases, k, tolls.toll_bases.shape[1] - 1)


def composite_table(game: Game, tolls: DeployedTolls | None) -> np.ndarray:
    table = game.latency_table()
    if tolls is not None:
        tolls.check_matches(game)
        table = table + tolls.table()
    return table


def agent_cost(game: Game, tolls: DeployedTolls | None, a: Allocation, i: int) -> float:
    loads = load_profile(game, a)
    c = composite_table(game, tolls)
    return float(sum(c[e, loads[e]] for e in game.action_sets[i][a[i]]))


def system_cost(game: Game, a: Allocation) -> float:
    """Total latency ``sum_e |a|_e * ell_e(|a|_e)``; tolls are transfers and excluded."""
    loads = load_profile(game, a)
    lat = game.latency_table()
    return float(np.sum(loads * lat[np.arange(game.n_resources), loads]))


def rosenthal_potential(game: Game, tolls: DeployedTolls | None, a: Allocation) -> float:
    loads = load_profile(game, a)
    c = composite_table(game, tolls)
    cums = np.cumsum(c, axis=1)
    return float(cums[np.arange(game.n_resources), loads].sum())
