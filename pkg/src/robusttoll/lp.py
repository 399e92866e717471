"""Dense revised simplex for small and medium linear programs.

Problems are stated as

    minimize    c @ x
    subject to  A_eq @ x == b_eq
                A_ub @ x <= b_ub
                lb <= x <= ub

and converted internally to standard form ``A x = b, x >= 0``. The solver
uses a two-phase method, an explicit basis inverse with periodic
refactorisation, Dantzig pricing and a switch to Bland's rule once progress
stalls. Rows and columns are equilibrated before solving.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-8
OPT_TOL = 1e-9
REFACTOR_EVERY = 50
STALL_THRESHOLD = 30

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class SolverError(RuntimeError):
    """Raised on numerical breakdown, e.g. the iteration cap was hit."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


def _as_matrix(a, ncols):
    if a is None:
        return np.zeros((0, ncols))
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return np.zeros((0, ncols))
    return a


@dataclass(frozen=True)
class LpProblem:
    c: np.ndarray
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None
    A_ub: np.ndarray = None
    b_ub: np.ndarray = None
    lb: np.ndarray = None
    ub: np.ndarray = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        nvar = c.size
        A_eq = _as_matrix(self.A_eq, nvar)
        A_ub = _as_matrix(self.A_ub, nvar)
        b_eq = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float).ravel()
        b_ub = np.zeros(0) if self.b_ub is None else np.asarray(self.b_ub, dtype=float).ravel()
        lb = np.zeros(nvar) if self.lb is None else np.broadcast_to(np.asarray(self.lb, dtype=float), (nvar,)).copy()
        ub = np.full(nvar, np.inf) if self.ub is None else np.broadcast_to(np.asarray(self.ub, dtype=float), (nvar,)).copy()
        if A_eq.shape != (b_eq.size, nvar):
            raise ValueError(f"A_eq has shape {A_eq.shape}, expected ({b_eq.size}, {nvar})")
        if A_ub.shape != (b_ub.size, nvar):
            raise ValueError(f"A_ub has shape {A_ub.shape}, expected ({b_ub.size}, {nvar})")
        for name, arr in (("c", c), ("A_eq", A_eq), ("b_eq", b_eq), ("A_ub", A_ub), ("b_ub", b_ub)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if np.any(lb == np.inf) or np.any(ub == -np.inf) or np.any(lb > ub):
            raise ValueError("inconsistent variable bounds")
        for name, arr in (("c", c), ("A_eq", A_eq), ("b_eq", b_eq), ("A_ub", A_ub),
                          ("b_ub", b_ub), ("lb", lb), ("ub", ub)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vars(self):
        return self.c.size

    def dump(self) -> str:
        """Plain-text tabular dump, one constraint per line."""
        fmt = lambda v: repr(float(v))
        lines = [f"# vars {self.n_vars} eq {self.b_eq.size} ub {self.b_ub.size}"]
        lines.append("min " + " ".join(fmt(v) for v in self.c))
        for row, rhs in zip(self.A_eq, self.b_eq):
            lines.append("eq " + " ".join(fmt(v) for v in row) + " = " + fmt(rhs))
        for row, rhs in zip(self.A_ub, self.b_ub):
            lines.append("ub " + " ".join(fmt(v) for v in row) + " <= " + fmt(rhs))
        lines.append("lb " + " ".join(fmt(v) for v in self.lb))
        lines.append("ub " + " ".join(fmt(v) for v in self.ub))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class LpSolution:
    status: str
    value: float = np.nan
    x: np.ndarray = None
    dual_eq: np.ndarray = None
    dual_ub: np.ndarray = None
    reduced_costs: np.ndarray = None
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status == OPTIMAL

    def dual_value(self, problem: LpProblem) -> float:
        """Dual objective implied by the multipliers (equals ``value`` at optimality)."""
        r = self.reduced_costs
        bound = np.where(r > 0, problem.lb, problem.ub)
        bound_part = r * np.where(np.isfinite(bound), bound, 0.0)
        return float(problem.b_eq @ self.dual_eq + problem.b_ub @ self.dual_ub + bound_part.sum())


class _Standard:
    """Standard-form image of an LpProblem plus the maps back."""

    def __init__(self, p: LpProblem):
        nvar = p.n_vars
        cols = []  # (orig var, sign) per standard column
        shift = np.zeros(nvar)  # x = shift + sum(sign * x')
        extra_rows = []  # (standard column, bound) rows x' <= bound
        for i in range(nvar):
            lo, hi = p.lb[i], p.ub[i]
            if np.isfinite(lo):
                shift[i] = lo
                cols.append((i, 1.0))
                if np.isfinite(hi):
                    extra_rows.append((len(cols) - 1, hi - lo))
            elif np.isfinite(hi):
                shift[i] = hi
                cols.append((i, -1.0))
            else:
                cols.append((i, 1.0))
                cols.append((i, -1.0))
        self.cols = cols
        self.shift = shift
        ncol = len(cols)
        T = np.zeros((nvar, ncol))
        for k, (i, s) in enumerate(cols):
            T[i, k] = s

        A_eq = p.A_eq @ T
        b_eq = p.b_eq - p.A_eq @ shift
        A_ub = p.A_ub @ T
        b_ub = p.b_ub - p.A_ub @ shift
        if extra_rows:
            B = np.zeros((len(extra_rows), ncol))
            for r, (k, bound) in enumerate(extra_rows):
                B[r, k] = 1.0
            A_ub = np.vstack([A_ub, B])
            b_ub = np.concatenate([b_ub, [bnd for _, bnd in extra_rows]])

        n_eq, n_ub = A_eq.shape[0], A_ub.shape[0]
        m = n_eq + n_ub
        A = np.zeros((m, ncol + n_ub))
        A[:n_eq, :ncol] = A_eq
        A[n_eq:, :ncol] = A_ub
        A[n_eq:, ncol:] = np.eye(n_ub)
        b = np.concatenate([b_eq, b_ub])
        c = np.concatenate([T.T @ p.c, np.zeros(n_ub)])

        flip = np.where(b < 0, -1.0, 1.0)
        A *= flip[:, None]
        b *= flip

        # equilibrate: rows, then columns
        rmax = np.abs(A).max(axis=1) if A.size else np.zeros(m)
        rscale = np.where(rmax > 0, 1.0 / np.where(rmax > 0, rmax, 1.0), 1.0)
        A *= rscale[:, None]
        b *= rscale
        cmax = np.abs(A).max(axis=0) if A.size else np.zeros(A.shape[1])
        cscale = np.where(cmax > 0, 1.0 / np.where(cmax > 0, cmax, 1.0), 1.0)
        A *= cscale[None, :]
        c = c * cscale

        self.A, self.b, self.c = A, b, c
        self.T = T
        self.n_eq, self.n_user_ub = n_eq, p.A_ub.shape[0]
        self.ncol = ncol
        self.flip, self.rscale, self.cscale = flip, rscale, cscale
        self.const = float(p.c @ shift)
        # slack columns usable as an initial basis: +1 after flip
        self.unit_cols = {}
        for r in range(n_ub):
            if flip[n_eq + r] > 0:
                self.unit_cols[n_eq + r] = ncol + r

    def recover_x(self, xs):
        xs = xs[: self.A.shape[1]] * self.cscale
        return self.shift + self.T @ xs[: self.ncol]

    def recover_y(self, ys):
        # y for scaled/flipped rows -> y for original rows
        return ys * self.rscale * self.flip


def _solve_standard(A, b, c, basis, allowed, max_iter, counter):
    """Revised simplex phase on standard form starting from a feasible basis.

    ``allowed`` masks columns eligible to enter. Returns (status, basis, B_inv, x_B).
    """
    m = A.shape[0]
    basis = list(basis)
    B_inv = np.linalg.inv(A[:, basis]) if m else np.zeros((0, 0))
    x_B = B_inv @ b
    bland = False
    best_obj = np.inf
    stall = 0
    since_refactor = 0
    while True:
        if counter[0] >= max_iter:
            raise SolverError("simplex iteration cap exceeded",
                              {"iterations": counter[0], "rows": m, "cols": A.shape[1]})
        y = c[basis] @ B_inv
        d = c - y @ A
        d[~allowed] = 0.0
        d[basis] = 0.0
        candidates = np.flatnonzero(d < -OPT_TOL)
        if candidates.size == 0:
            return OPTIMAL, basis, B_inv, x_B
        if bland:
            q = int(candidates[0])
        else:
            q = int(candidates[np.argmin(d[candidates])])
        col = B_inv @ A[:, q]
        pos = np.flatnonzero(col > PIVOT_TOL)
        if pos.size == 0:
            return UNBOUNDED, basis, B_inv, x_B
        ratios = np.maximum(x_B[pos], 0.0) / col[pos]
        rmin = ratios.min()
        ties = pos[ratios <= rmin + 1e-12 * (1.0 + rmin)]
        if ties.size > 1:
            # prefer the largest pivot, fall back to smallest variable index under Bland
            if bland:
                r = int(ties[np.argmin([basis[t] for t in ties])])
            else:
                r = int(ties[np.argmax(np.abs(col[ties]))])
        else:
            r = int(ties[0])
        theta = max(x_B[r], 0.0) / col[r]
        x_B = x_B - theta * col
        x_B[r] = theta
        piv = col[r]
        row_r = B_inv[r] / piv
        B_inv -= np.outer(col, row_r)
        B_inv[r] = row_r
        basis[r] = q
        counter[0] += 1
        since_refactor += 1
        if since_refactor >= REFACTOR_EVERY:
            B_inv = np.linalg.inv(A[:, basis])
            x_B = B_inv @ b
            since_refactor = 0
        obj = float(c[basis] @ x_B)
        if not np.isfinite(best_obj) or obj < best_obj - 1e-12 * (1.0 + abs(best_obj)):
            best_obj = obj
            stall = 0
        else:
            stall += 1
            if stall >= STALL_THRESHOLD:
                bland = True


def solve(p: LpProblem, max_iter: int | None = None) -> LpSolution:
    """Solve ``p``; infeasible and unbounded problems are returned as statuses."""
    std = _Standard(p)
    A, b, c = std.A, std.b, std.c
    m, N = A.shape
    if max_iter is None:
        max_iter = 50 * (m + N)
    counter = [0]

    # phase 1: artificials on rows without a usable slack
    art_rows = [r for r in range(m) if r not in std.unit_cols]
    A1 = np.hstack([A, np.zeros((m, len(art_rows)))])
    for k, r in enumerate(art_rows):
        A1[r, N + k] = 1.0
    basis = [std.unit_cols.get(r, -1) for r in range(m)]
    for k, r in enumerate(art_rows):
        basis[r] = N + k
    c1 = np.concatenate([np.zeros(N), np.ones(len(art_rows))])
    allowed = np.ones(A1.shape[1], dtype=bool)
    rows = np.arange(m)
    if art_rows:
        status, basis, B_inv, x_B = _solve_standard(A1, b, c1, basis, allowed, max_iter, counter)
        infeas = float(c1[basis] @ x_B)
        if infeas > FEAS_TOL * (1.0 + np.abs(b).max()):
            return LpSolution(INFEASIBLE, iterations=counter[0], info={"phase1": infeas})
        # drive remaining artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] < N:
                continue
            row = B_inv[r] @ A1[:, :N]
            row[[j for j in basis if j < N]] = 0.0
            cand = np.flatnonzero(np.abs(row) > PIVOT_TOL)
            if cand.size:
                q = int(cand[np.argmax(np.abs(row[cand]))])
                col = B_inv @ A1[:, q]
                row_r = B_inv[r] / col[r]
                B_inv -= np.outer(col, row_r)
                B_inv[r] = row_r
                basis[r] = q
            else:
                keep[r] = False  # redundant row
        rows = np.flatnonzero(keep)
        basis = [basis[r] for r in rows]

    A2 = A[rows]
    b2 = b[rows]
    allowed = np.ones(N, dtype=bool)
    status, basis, B_inv, x_B = _solve_standard(A2, b2, c, basis, allowed, max_iter, counter)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, iterations=counter[0])

    # final refactorisation for clean values
    B_inv = np.linalg.inv(A2[:, basis]) if rows.size else np.zeros((0, 0))
    x_B = B_inv @ b2
    xs = np.zeros(N)
    xs[basis] = np.maximum(x_B, 0.0)
    ys_red = c[basis] @ B_inv
    ys = np.zeros(m)
    ys[rows] = ys_red
    x = std.recover_x(xs)
    y = std.recover_y(ys)
    y_eq = y[: std.n_eq]
    y_ub = y[std.n_eq: std.n_eq + std.n_user_ub]
    red = p.c - p.A_eq.T @ y_eq - p.A_ub.T @ y_ub
    value = float(p.c @ x)
    return LpSolution(OPTIMAL, value, x, y_eq, y_ub, red, counter[0])
