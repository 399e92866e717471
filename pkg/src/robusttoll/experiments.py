"""Perturbation experiments and robust-PoA sweeps.

Monte-Carlo trials draw misspecified coefficients
``gamma_tilde = (1 + mu) * gamma`` with ``mu`` uniform on ``[-delta, delta]``
and record the equilibria and PoA the resulting tolls induce. Each trial
owns an RNG stream keyed by ``(seed, delta index, trial)``, so results do not
depend on execution order or on the number of worker processes.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .equilibrium import DEFAULT_CAP, StateSpace
from .game import BasisSet, Game
from .robust import solve_robust_poa
from .tolls import TollMechanismSpec, design, lambda_scale

DEFAULT_DELTAS = tuple(round(0.05 * k, 2) for k in range(1, 11))
SWEEP_DELTAS = tuple(round(0.05 * k, 2) for k in range(0, 11))
DEFAULT_LAMBDAS = (0.0, 0.25, 0.5, 1.0, 2.0, 4.0)
FIG2_MECHANISMS = ("marginal_cost", "optimal_local", "optimal_constant")


@dataclass(frozen=True)
class PerturbationProtocol:
    delta_grid: tuple = DEFAULT_DELTAS
    trials: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        grid = tuple(float(d) for d in self.delta_grid)
        if any(d < 0 or not np.isfinite(d) for d in grid):
            raise ValueError("delta grid values must be finite and >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")
        object.__setattr__(self, "delta_grid", grid)


@dataclass(frozen=True)
class DeltaSummary:
    delta: float
    max_poa: float
    avg_poa: float
    frac_new_ne: float
    trial_poa: tuple = field(repr=False, default=())
    trial_new_ne: tuple = field(repr=False, default=())


@dataclass(frozen=True)
class TrialSummary:
    rows: tuple
    noiseless_poa: float
    noiseless_ne: frozenset
    mode: str

    def __iter__(self):
        return iter(self.rows)


def trial_rng(seed: int, delta_index: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(delta_index), int(trial)]))


def perturbed_gamma(gamma: np.ndarray, delta: float, rng: np.random.Generator) -> np.ndarray:
    mu = rng.uniform(-delta, delta, size=gamma.shape)
    return (1.0 + mu) * gamma


class _Evaluator:
    """Everything needed to score one trial, built once per process."""

    def __init__(self, game, toll_bases, mode, cap):
        self.game = game
        self.toll_bases = np.asarray(toll_bases, dtype=float)
        self.space = StateSpace(game, mode, cap)
        self.latency = game.latency_table()
        self.costs = self.space.system_costs(self.latency)
        self.opt = float(self.costs.min())
        mask = self.space.nash_mask(self.latency + game.gamma @ self.toll_bases)
        self.base_mask = mask
        self.base_poa = self._poa(mask)

    def _poa(self, mask):
        worst = float(self.costs[mask].max())
        return worst / self.opt if self.opt > 0 else (1.0 if worst <= 0 else np.inf)

    def trial(self, gamma_tilde):
        mask = self.space.nash_mask(self.latency + gamma_tilde @ self.toll_bases)
        return self._poa(mask), bool(np.any(mask & ~self.base_mask))


_WORKER = {}


def _init_worker(game, toll_bases, mode, cap):
    _WORKER["ev"] = _Evaluator(game, toll_bases, mode, cap)


def _run_delta(args):
    k, delta, trials, seed = args
    ev = _WORKER["ev"]
    out = []
    for t in range(trials):
        gt = perturbed_gamma(ev.game.gamma, delta, trial_rng(seed, k, t))
        out.append(ev.trial(gt))
    return k, out


def run_monte_carlo(game: Game, spec: TollMechanismSpec | None = None,
                    protocol: PerturbationProtocol | None = None, mode: str = "auto",
                    cap: int = DEFAULT_CAP, workers: int = 1, toll_bases=None) -> TrialSummary:
    """Perturbation study of ``spec``'s tolls on ``game``, one summary row per delta."""
    spec = spec or TollMechanismSpec()
    protocol = protocol or PerturbationProtocol()
    if toll_bases is None:
        toll_bases = design(game.basis, spec).toll_bases
    _init_worker(game, toll_bases, mode, cap)
    ev = _WORKER["ev"]
    jobs = [(k, d, protocol.trials, protocol.seed) for k, d in enumerate(protocol.delta_grid)]
    if workers > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker,
                                 initargs=(game, toll_bases, mode, cap)) as pool:
            results = dict(pool.map(_run_delta, jobs))
    else:
        results = dict(map(_run_delta, jobs))
    rows = []
    for k, d in enumerate(protocol.delta_grid):
        poas = tuple(p for p, _ in results[k])
        new = tuple(x for _, x in results[k])
        rows.append(DeltaSummary(d, max(poas), float(np.mean(poas)), float(np.mean(new)), poas, new))
    base = frozenset(ev.space.key(i) for i in np.flatnonzero(ev.base_mask))
    return TrialSummary(tuple(rows), ev.base_poa, base, ev.space.mode)


def _mechanism_tolls(basis, mechanism, allow_negative=False, lam=1.0):
    return design(basis, TollMechanismSpec(mechanism, lam=lam, allow_negative=allow_negative)).toll_bases


def sweep_robust_poa(mechanisms=FIG2_MECHANISMS, n: int = 8, deltas=SWEEP_DELTAS,
                     basis: BasisSet | None = None, allow_negative: bool = False) -> list[dict]:
    """Robust PoA bound per mechanism and delta (affine costs by default)."""
    basis = basis or BasisSet.affine(n)
    rows = []
    for mech in mechanisms:
        F = _mechanism_tolls(basis, mech, allow_negative)
        for d in deltas:
            r = solve_robust_poa(basis.values, F, n, float(d))
            rows.append({"mechanism": mech, "n": n, "delta": float(d), "p_star": r.p_star, "poa": r.poa})
    return rows


def sweep_lambda(lambdas=DEFAULT_LAMBDAS, deltas=SWEEP_DELTAS, n: int = 8,
                 basis: BasisSet | None = None, base: str = "optimal_local",
                 allow_negative: bool = False) -> list[dict]:
    """Robust PoA of ``lam * (b + T) - b`` for the base mechanism ``T``."""
    basis = basis or BasisSet.affine(n)
    T = _mechanism_tolls(basis, base, allow_negative)
    rows = []
    for lam in lambdas:
        F = lambda_scale(T, basis.values, float(lam))
        for d in deltas:
            r = solve_robust_poa(basis.values, F, n, float(d))
            rows.append({"lambda": float(lam), "delta": float(d), "p_star": r.p_star, "poa": r.poa})
    return rows


MC_HEADER = ("delta", "max_poa", "avg_poa", "frac_new_ne")
FIG2_HEADER = ("mechanism", "delta", "poa")
ROBUST_HEADER = ("mechanism", "n", "delta", "p_star", "poa")
FIG3_HEADER = ("lambda", "delta", "poa")


def write_csv(path, rows, header):
    """Write dict rows (or objects with matching attributes) with a fixed header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            get = r.get if isinstance(r, dict) else (lambda k, r=r: getattr(r, k))
            w.writerow([_fmt(get(h)) for h in header])


def _fmt(v):
    if isinstance(v, float):
        return "inf" if np.isinf(v) else repr(v)
    return v
