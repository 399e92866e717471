"""Pure Nash equilibria, optimal allocations and the price of anarchy.

Two enumeration modes share one vectorised engine (:class:`StateSpace`):

* ``generic``: every joint action in lexicographic order (agent 0 slowest);
* ``symmetric``: anonymous profiles (how many agents pick each action),
  valid when all agents share one action set since costs depend only on
  loads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .game import (
    Allocation,
    DeployedTolls,
    Game,
    check_allocation,
    composite_table,
    load_profile,
    system_cost,
)

DEFAULT_CAP = 10**6
TIE_TOL = 1e-12
_CHUNK = 50_000


class EnumerationError(RuntimeError):
    pass


def _compositions(n: int, parts: int):
    """All count vectors of length ``parts`` summing to ``n``, lexicographic."""
    if parts == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _compositions(n - first, parts - 1):
            yield (first,) + rest


class StateSpace:
    """Enumerated states of a game with their loads and unilateral moves."""

    def __init__(self, game: Game, mode: str = "auto", cap: int = DEFAULT_CAP):
        if mode == "auto":
            if game.n_allocations <= cap:
                mode = "generic"
            elif game.is_symmetric:
                mode = "symmetric"
            else:
                raise EnumerationError(
                    f"{game.n_allocations} joint actions exceed the cap of {cap} and the game is not symmetric")
        self.game = game
        self.mode = mode
        E = game.n_resources
        if mode == "generic":
            if game.n_allocations > cap:
                raise EnumerationError(f"{game.n_allocations} joint actions exceed the cap of {cap}")
            sizes = [len(A) for A in game.action_sets]
            states = np.stack(np.unravel_index(np.arange(game.n_allocations), sizes), axis=1)
            self.incidences = [game.incidence(i) for i in range(game.n_agents)]
            loads = np.zeros((states.shape[0], E), dtype=np.int64)
            for i, inc in enumerate(self.incidences):
                loads += inc[states[:, i]]
            self.multiplicity = np.ones(states.shape[0], dtype=np.int64)
        elif mode == "symmetric":
            if not game.is_symmetric:
                raise EnumerationError("symmetric mode needs identical action sets")
            R = game.incidence(0)
            self.route_incidence = R
            n, A = game.n_agents, R.shape[0]
            n_profiles = math.comb(n + A - 1, A - 1)
            if n_profiles > cap:
                raise EnumerationError(f"{n_profiles} anonymous profiles exceed the cap of {cap}")
            states = np.array(list(_compositions(n, A)), dtype=np.int64)
            loads = states @ R.astype(np.int64)
            fact = math.factorial
            self.multiplicity = np.array(
                [fact(n) // math.prod(fact(int(c)) for c in row) for row in states], dtype=object)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        self.states = states
        self.loads = loads
        self._rows = np.arange(E)

    def __len__(self):
        return self.states.shape[0]

    def move_blocks(self):
        """Yield ``(mover, rows, loads, from_inc, to_incs)`` covering every unilateral move.

        ``mover`` is the agent (generic) or the action being left (symmetric).
        ``from_inc`` is the mover's current bundle per row, ``to_incs`` the
        candidate bundles (the current bundle included, with zero gain).
        """
        N = len(self)
        if self.mode == "generic":
            for i, inc in enumerate(self.incidences):
                for s in range(0, N, _CHUNK):
                    rows = np.arange(s, min(N, s + _CHUNK))
                    yield i, rows, self.loads[rows], inc[self.states[rows, i]], inc
        else:
            R = self.route_incidence
            for p in range(R.shape[0]):
                occupied = np.flatnonzero(self.states[:, p] > 0)
                for s in range(0, occupied.size, _CHUNK):
                    rows = occupied[s: s + _CHUNK]
                    from_inc = np.broadcast_to(R[p], (rows.size, R.shape[1]))
                    yield p, rows, self.loads[rows], from_inc, R

    def _lookup(self, table, loads):
        return table[self._rows[None, :], loads]

    def max_gain(self, composite: np.ndarray) -> np.ndarray:
        """Largest cost reduction any agent can get by deviating, per state."""
        gain = np.zeros(len(self))
        for _, rows, L, frm, to in self.move_blocks():
            cur = np.where(frm, self._lookup(composite, L), 0.0).sum(axis=1)
            plus = self._lookup(composite, L - frm + 1)
            dev = plus @ to.T.astype(float)
            g = (cur[:, None] - dev).max(axis=1)
            np.maximum.at(gain, rows, g)
        return gain

    def nash_mask(self, composite: np.ndarray, tol: float = TIE_TOL) -> np.ndarray:
        return self.max_gain(composite) <= tol

    def system_costs(self, latency: np.ndarray) -> np.ndarray:
        return (self.loads * self._lookup(latency, self.loads)).sum(axis=1)

    def allocation(self, idx: int) -> Allocation:
        """Joint action for state ``idx`` (a representative one in symmetric mode)."""
        if self.mode == "generic":
            return tuple(int(q) for q in self.states[idx])
        counts = self.states[idx]
        return tuple(int(p) for p, c in enumerate(counts) for _ in range(int(c)))

    def key(self, idx: int) -> tuple:
        return tuple(int(v) for v in self.states[idx])


@dataclass(frozen=True)
class NashSet:
    """Equilibria as state keys: allocations (generic) or count profiles (symmetric)."""

    mode: str
    members: tuple
    multiplicities: tuple
    representatives: tuple

    def __len__(self):
        return len(self.members)

    def __contains__(self, key):
        return tuple(key) in set(self.members)

    def as_set(self) -> frozenset:
        return frozenset(self.members)

    def issubset(self, other: "NashSet") -> bool:
        if self.mode != other.mode:
            raise ValueError("cannot compare Nash sets enumerated in different modes")
        return self.as_set() <= other.as_set()


@dataclass(frozen=True)
class PoaReport:
    worst_ne_cost: float
    opt_cost: float
    poa: float
    worst_ne: Allocation
    optimum: Allocation


def _nash_set(space: StateSpace, mask: np.ndarray) -> NashSet:
    idx = np.flatnonzero(mask)
    return NashSet(
        space.mode,
        tuple(space.key(k) for k in idx),
        tuple(int(space.multiplicity[k]) for k in idx),
        tuple(space.allocation(k) for k in idx),
    )


def is_nash(game: Game, tolls: DeployedTolls | None, a: Allocation, tol: float = TIE_TOL) -> bool:
    """True iff no agent can lower its cost by more than ``tol`` by deviating alone."""
    return _best_deviation(game, composite_table(game, tolls), a, tol) is None


def _best_deviation(game, comp, a, tol):
    check_allocation(game, a)
    loads = load_profile(game, a)
    best = None
    for i, q0 in enumerate(a):
        cur_bundle = game.action_sets[i][q0]
        cur = sum(comp[e, loads[e]] for e in cur_bundle)
        for q, bundle in enumerate(game.action_sets[i]):
            if q == q0:
                continue
            dev = sum(comp[e, loads[e]] for e in bundle & cur_bundle)
            dev += sum(comp[e, loads[e] + 1] for e in bundle - cur_bundle)
            gain = cur - dev
            if gain > tol and (best is None or gain > best[2]):
                best = (i, q, gain)
    return best


def enumerate_nash(game: Game, tolls: DeployedTolls | None = None, mode: str = "auto",
                   cap: int = DEFAULT_CAP, space: StateSpace | None = None) -> NashSet:
    space = space or StateSpace(game, mode, cap)
    return _nash_set(space, space.nash_mask(composite_table(game, tolls)))


def best_response_dynamics(game: Game, tolls: DeployedTolls | None, start: Allocation,
                           order: str = "round_robin", tol: float = TIE_TOL) -> Allocation:
    """Improve one agent at a time until no agent gains more than ``tol``.

    Agents are visited round-robin; each takes the lowest-indexed strictly
    improving action. Every accepted move lowers the Rosenthal potential.
    """
    if order != "round_robin":
        raise ValueError(f"unsupported order policy {order!r}")
    comp = composite_table(game, tolls)
    a = list(start)
    check_allocation(game, a)
    quiet = 0
    i = 0
    while quiet < game.n_agents:
        loads = load_profile(game, tuple(a))
        cur_bundle = game.action_sets[i][a[i]]
        cur = sum(comp[e, loads[e]] for e in cur_bundle)
        moved = False
        for q, bundle in enumerate(game.action_sets[i]):
            if q == a[i]:
                continue
            dev = sum(comp[e, loads[e]] for e in bundle & cur_bundle)
            dev += sum(comp[e, loads[e] + 1] for e in bundle - cur_bundle)
            if cur - dev > tol:
                a[i] = q
                moved = True
                break
        quiet = 0 if moved else quiet + 1
        i = (i + 1) % game.n_agents
    return tuple(a)


def optimal_cost(game: Game, mode: str = "auto", cap: int = DEFAULT_CAP,
                 space: StateSpace | None = None) -> tuple[float, Allocation]:
    space = space or StateSpace(game, mode, cap)
    costs = space.system_costs(game.latency_table())
    k = int(np.argmin(costs))
    return float(costs[k]), space.allocation(k)


def _ratio(num, den):
    if den > 0:
        return num / den
    return 1.0 if num <= 0 else np.inf


def poa(game: Game, tolls: DeployedTolls | None = None, mode: str = "auto",
        cap: int = DEFAULT_CAP, space: StateSpace | None = None) -> PoaReport:
    """Worst equilibrium latency (equilibria under tolls) over the untolled optimum."""
    space = space or StateSpace(game, mode, cap)
    costs = space.system_costs(game.latency_table())
    mask = space.nash_mask(composite_table(game, tolls))
    if not mask.any():
        raise EnumerationError("no pure Nash equilibrium found; this contradicts the potential argument")
    ne_idx = np.flatnonzero(mask)
    w = int(ne_idx[np.argmax(costs[ne_idx])])
    o = int(np.argmin(costs))
    return PoaReport(float(costs[w]), float(costs[o]), _ratio(costs[w], costs[o]),
                     space.allocation(w), space.allocation(o))
