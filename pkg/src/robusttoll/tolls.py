"""Local linear toll mechanisms and robustness certificates.

A local linear mechanism is fixed by its toll bases ``T(b_j)``; the toll on
resource ``e`` is ``sum_j gamma_tilde[e, j] * T(b_j)``.

Optimal tolls come from the LP dual of the worst-case PoA program at zero
misspecification. For a basis ``b`` on loads ``1..n`` and a candidate
composite cost ``G`` (cost plus toll, up to a positive multiplier ``mu``)
the guaranteed efficiency ``nu = 1/PoA`` is feasible iff for every label
``(x, y, z)`` with ``1 <= x+y+z <= n``

    (x+z) b(x+z) - nu (x+y) b(x+y) + y G(x+y) - z G(x+y+1) >= 0.

For congestion-dependent tolls ``G = b + f`` with ``mu = 1`` loses nothing
(rescaling ``G`` is the lambda-family below). For constant tolls ``G = mu b
+ w`` with scalar ``w`` and free ``mu >= 0``, so the toll is ``w / mu``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lp
from .equilibrium import DEFAULT_CAP, TIE_TOL, StateSpace
from .game import BasisSet, DeployedTolls, Game
from .robust import label_coefficients, solve_robust_poa, triples

KINDS = ("zero", "marginal_cost", "optimal_local", "optimal_constant")


class DesignError(RuntimeError):
    pass


class CertificationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TollMechanismSpec:
    kind: str = "optimal_local"
    lam: float = 1.0
    allow_negative: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown toll mechanism {self.kind!r}; expected one of {KINDS}")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError("lambda must be finite and non-negative")


def marginal_cost_toll(values) -> np.ndarray:
    """``(x-1) * (ell(x) - ell(x-1))`` on a table indexed by load ``0..n``."""
    v = np.asarray(values, dtype=float)
    out = np.zeros_like(v)
    x = np.arange(2, v.shape[-1])
    out[..., 2:] = (x - 1) * (v[..., 2:] - v[..., 1:-1])
    return out


def lambda_scale(base_toll, cost, lam: float) -> np.ndarray:
    """Toll ``lam * (cost + base) - cost``; same nominal PoA for every ``lam > 0``."""
    base_toll = np.asarray(base_toll, dtype=float)
    cost = np.asarray(cost, dtype=float)
    out = lam * (cost + base_toll) - cost
    out[..., 0] = 0.0
    return out


def _design_rows(b: np.ndarray, n: int):
    t = triples(n)
    x, y, z = t[:, 0], t[:, 1], t[:, 2]
    obj, norm, ne = label_coefficients(b, x, y, z)
    return x, y, z, obj, norm, ne


def _local_design(b: np.ndarray, n: int):
    """Maximise ``nu`` over congestion-dependent tolls with ``mu = 1``.

    Variables ``[nu, f(1), ..., f(n)]``, all free. Returns ``(nu, f)`` with
    ``f`` indexed by load ``0..n``.
    """
    x, y, z, obj, norm, ne = _design_rows(b, n)
    rows = len(x)
    A = np.zeros((rows, n + 1))
    A[:, 0] = norm
    r = np.arange(rows)
    has_y = y > 0
    has_z = z > 0
    A[r[has_y], (x + y)[has_y]] -= y[has_y]
    A[r[has_z], (x + y + 1)[has_z]] += z[has_z]
    rhs = obj + ne
    c = np.zeros(n + 1)
    c[0] = -1.0
    sol = lp.solve(lp.LpProblem(c, A_ub=A, b_ub=rhs, lb=np.full(n + 1, -np.inf)))
    if not sol.ok:
        raise DesignError(f"optimal local toll LP is {sol.status} (n={n})")
    f = np.zeros(n + 1)
    f[1:] = sol.x[1:]
    return float(sol.x[0]), f


def _constant_design(B: np.ndarray, n: int, nonneg: bool):
    """Joint design of one constant toll per basis with a shared multiplier.

    Variables ``[nu, mu, w_1..w_m]``. A second stage keeps ``nu`` optimal and
    maximises ``mu`` (capped) so the toll ``w / mu`` is finite.
    """
    m = B.shape[0]
    blocks = []
    rhs = []
    for j in range(m):
        x, y, z, obj, norm, ne = _design_rows(B[j], n)
        A = np.zeros((len(x), 2 + m))
        A[:, 0] = norm
        A[:, 1] = -ne
        A[:, 2 + j] = -(y - z)
        blocks.append(A)
        rhs.append(obj)
    A = np.vstack(blocks)
    rhs = np.concatenate(rhs)
    lb = np.array([-np.inf, 0.0] + [0.0 if nonneg else -np.inf] * m)
    c = np.zeros(2 + m)
    c[0] = -1.0
    first = lp.solve(lp.LpProblem(c, A_ub=A, b_ub=rhs, lb=lb))
    if not first.ok:
        raise DesignError(f"optimal constant toll LP is {first.status} (n={n})")
    nu = float(first.x[0])
    cap = max(1.0, float(first.x[1]))
    lb2 = lb.copy()
    lb2[0] = nu - 1e-9 * (1.0 + abs(nu))
    ub2 = np.full(2 + m, np.inf)
    ub2[1] = cap
    c2 = np.zeros(2 + m)
    c2[1] = -1.0
    second = lp.solve(lp.LpProblem(c2, A_ub=A, b_ub=rhs, lb=lb2, ub=ub2))
    if not second.ok or second.x[1] <= 1e-12:
        raise DesignError("constant toll design admits no positive cost multiplier")
    mu = float(second.x[1])
    w = second.x[2:] / mu
    tolls = np.zeros_like(B)
    tolls[:, 1:] = w[:, None]
    # nu at the second-stage point, reported with the multiplier normalised away
    return float(second.x[0]), tolls


def _canonical_nonnegative(B: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Smallest ``lam`` with ``lam (b + f) - b >= 0`` for every basis, applied to all."""
    G = B + F
    pos_b = B[:, 1:] > 0
    Gk = G[:, 1:]
    if np.any(pos_b & (Gk <= 0)) or np.any(Gk < -1e-12):
        raise DesignError("no non-subsidising member of the toll family exists")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(pos_b, B[:, 1:] / Gk, 0.0)
    lam = float(ratios.max()) if ratios.size else 1.0
    if lam <= 0:
        return np.clip(F, 0.0, None)
    out = lambda_scale(F, B, lam)
    return np.where(np.abs(out) < 1e-12, 0.0, out)


@dataclass(frozen=True)
class TollDesign:
    """Toll bases for a basis set plus the guaranteed nominal PoA."""

    spec: TollMechanismSpec
    toll_bases: np.ndarray
    nominal_poa: float
    per_basis_poa: tuple = field(default=())


def design(basis: BasisSet, spec: TollMechanismSpec) -> TollDesign:
    """Toll bases ``T(b_j)`` for every basis function under ``spec``."""
    B = basis.values
    n = basis.n
    per = ()
    if spec.kind == "zero":
        F = np.zeros_like(B)
    elif spec.kind == "marginal_cost":
        F = marginal_cost_toll(B)
    elif spec.kind == "optimal_local":
        results = [_local_design(B[j], n) for j in range(basis.m)]
        F = np.array([f for _, f in results])
        if not spec.allow_negative:
            F = _canonical_nonnegative(B, F)
        per = tuple(1.0 / nu if nu > 0 else np.inf for nu, _ in results)
    else:
        nu, F = _constant_design(B, n, nonneg=not spec.allow_negative)
        per = (1.0 / nu if nu > 0 else np.inf,)
    if spec.lam != 1.0:
        F = lambda_scale(F, B, spec.lam)
    if per:
        nominal = max(per)
    else:
        nominal = solve_robust_poa(B, F, n, 0.0).poa
    return TollDesign(spec, F, nominal, per)


def optimal_local_toll(values, n: int | None = None, allow_negative: bool = False):
    """Optimal congestion-dependent toll for one basis function.

    ``values`` is indexed by load ``0..n``. Returns ``(toll_table, nominal_poa)``.
    """
    b = np.atleast_2d(np.asarray(values, dtype=float))
    if n is not None:
        b = b[:, : n + 1]
    d = design(BasisSet(b), TollMechanismSpec("optimal_local", allow_negative=allow_negative))
    return d.toll_bases[0], d.nominal_poa


def optimal_constant_toll(values, n: int | None = None, allow_negative: bool = False):
    b = np.atleast_2d(np.asarray(values, dtype=float))
    if n is not None:
        b = b[:, : n + 1]
    d = design(BasisSet(b), TollMechanismSpec("optimal_constant", allow_negative=allow_negative))
    return d.toll_bases[0], d.nominal_poa


def build_deployed_tolls(game: Game, spec: TollMechanismSpec, gamma_tilde=None,
                         toll_design: TollDesign | None = None) -> DeployedTolls:
    """Tolls from ``spec`` on the game's basis, deployed with ``gamma_tilde`` (default: the true gamma)."""
    toll_design = toll_design or design(game.basis, spec)
    gt = game.gamma if gamma_tilde is None else gamma_tilde
    tolls = DeployedTolls(toll_design.toll_bases, gt)
    tolls.check_matches(game)
    return tolls


# --- certification ---------------------------------------------------------


def _safe_radius(h0, wpos, caps, wneg):
    """Largest ``r`` with ``h0 - sum_k wpos_k min(r, caps_k) - r wneg > 0`` on ``[0, r)``.

    ``h0 > 0``; ``wpos >= 0`` has one column per capped coordinate and
    ``wneg >= 0`` is the uncapped slope. Returns ``inf`` when no root exists.
    """
    R = h0.size
    bps = np.unique(caps[np.isfinite(caps) & (caps > 0)])
    pts = np.concatenate([[0.0], bps])
    capped = np.minimum(pts[None, :, None], caps[None, None, :])
    phi = h0[:, None] - (wpos[:, None, :] * capped).sum(axis=2) - pts[None, :] * wneg[:, None]
    out = np.full(R, np.inf)
    nonpos = phi <= 0
    hit = nonpos.any(axis=1)
    first = np.argmax(nonpos, axis=1)
    rows = np.flatnonzero(hit)
    if rows.size:
        k = first[rows]
        r0, r1 = pts[k - 1], pts[k]
        p0, p1 = phi[rows, k - 1], phi[rows, k]
        out[rows] = r0 + p0 * (r1 - r0) / (p0 - p1)
    rest = np.flatnonzero(~hit)
    if rest.size:
        tail = (wpos[rest] * (caps[None, :] > pts[-1])).sum(axis=1) + wneg[rest]
        last = phi[rest, -1]
        with np.errstate(divide="ignore"):
            out[rest] = np.where(tail > 0, pts[-1] + last / np.where(tail > 0, tail, 1.0), np.inf)
    return out


@dataclass(frozen=True)
class RobustnessCertificate:
    """Perturbation radii that cannot create new equilibria.

    Any ``gamma_tilde >= 0`` strictly inside the ``epsilon`` box around
    ``gamma`` (or strictly inside the relative band ``delta_relative``) has
    an equilibrium set contained in the nominal one. ``delta`` is the
    conservative conversion ``epsilon / max(gamma)``.
    """

    epsilon: float
    delta: float
    delta_relative: float
    witness: dict | None
    n_states: int
    n_non_equilibria: int


def certify_epsilon(game: Game, spec: TollMechanismSpec | None = None, toll_bases=None,
                    mode: str = "auto", cap: int = DEFAULT_CAP, tol: float = TIE_TOL,
                    space: StateSpace | None = None) -> RobustnessCertificate:
    """Exact affine analysis of every strictly improving deviation.

    For a non-equilibrium state and an improving move, the cost advantage is
    ``h(g) = h_lat + sum_{e,j} w[e,j] g[e,j]`` in the deployed coefficients
    ``g``. The move stays improving while ``g`` is within the radius where
    the minimum of ``h`` over the box (clipped at zero) is positive.
    """
    if toll_bases is None:
        toll_bases = design(game.basis, spec or TollMechanismSpec()).toll_bases
    TB = np.asarray(toll_bases, dtype=float)
    if TB.shape != game.basis.values.shape:
        raise ValueError("toll bases must match the game's basis")
    try:
        space = space or StateSpace(game, mode, cap)
    except Exception as exc:  # noqa: BLE001 - surface as certification failure
        raise CertificationError(f"instance too large to certify exhaustively: {exc}") from exc

    gamma = game.gamma
    E, m = gamma.shape
    flat_gamma = gamma.ravel()
    lat = game.latency_table()
    rows_e = np.arange(E)
    N = len(space)
    best_abs = np.zeros(N)
    best_rel = np.zeros(N)
    best_move = [None] * N
    improving_any = np.zeros(N, dtype=bool)
    caps_abs = flat_gamma
    caps_rel = np.where(flat_gamma > 0, 1.0, 0.0)

    for mover, rows, L, frm, to in space.move_blocks():
        Lp = L - frm + 1
        cur_lat = np.where(frm, lat[rows_e, L], 0.0).sum(axis=1)
        plus_lat = lat[rows_e, Lp]
        tb_cur = np.where(frm[:, :, None], TB.T[L], 0.0)  # (R, E, m)
        tb_plus = TB.T[Lp]  # (R, E, m)
        for q in range(to.shape[0]):
            h_lat = cur_lat - plus_lat @ to[q].astype(float)
            w = (tb_cur - to[q][None, :, None] * tb_plus).reshape(len(rows), E * m)
            h0 = h_lat + w @ flat_gamma
            imp = np.flatnonzero(h0 > tol)
            if imp.size == 0:
                continue
            wi = w[imp]
            wpos = np.clip(wi, 0.0, None)
            wneg = np.clip(-wi, 0.0, None)
            r_abs = _safe_radius(h0[imp], wpos, caps_abs, wneg.sum(axis=1))
            r_rel = _safe_radius(h0[imp], wpos * flat_gamma, caps_rel, (wneg * flat_gamma).sum(axis=1))
            idx = rows[imp]
            improving_any[idx] = True
            better = r_abs > best_abs[idx]
            for k in np.flatnonzero(better):
                best_move[idx[k]] = (mover, q)
            best_abs[idx] = np.maximum(best_abs[idx], r_abs)
            best_rel[idx] = np.maximum(best_rel[idx], r_rel)

    non_ne = np.flatnonzero(improving_any)
    if non_ne.size == 0:
        return RobustnessCertificate(np.inf, np.inf, np.inf, None, N, 0)
    k = int(non_ne[np.argmin(best_abs[non_ne])])
    eps = float(best_abs[k])
    delta_rel = float(best_rel[non_ne].min())
    gmax = flat_gamma[flat_gamma > 0].max() if np.any(flat_gamma > 0) else 0.0
    delta = eps / gmax if gmax > 0 else np.inf
    witness = None
    if np.isfinite(eps):
        # no witness when no toll error can destabilise a non-equilibrium
        witness = {"state": space.key(k), "allocation": space.allocation(k), "mode": space.mode,
                   "move": _describe_move(space, best_move[k])}
    return RobustnessCertificate(eps, delta, delta_rel, witness, N, int(non_ne.size))


def _describe_move(space: StateSpace, move):
    if move is None:
        return None
    mover, q = move
    if space.mode == "generic":
        return {"agent": int(mover), "to_action": int(q)}
    return {"from_action": int(mover), "to_action": int(q)}
