"""Dense two-phase simplex solver for the small LPs behind the effort metrics.

Deterministic: Dantzig pricing with lowest-index tie breaking, switching to
Bland's rule after a stall to guarantee termination. Problem sizes here are
tens of variables, so a dense tableau is the simplest correct choice.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIVOT_TOL = 1e-12


class NumericalFailure(Exception):
    pass


class Status(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    relations: list            # per row: "<=", "=" or ">="
    b: np.ndarray
    sense: str = "min"         # "min" or "max"
    lower: np.ndarray = None   # default 0; -inf for free
    upper: np.ndarray = None   # default +inf

    def __post_init__(self):
        self.c = np.atleast_1d(np.asarray(self.c, dtype=float))
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        n = len(self.c)
        m = len(self.b)
        if self.A.shape != (m, n):
            raise ValueError(f"A shape {self.A.shape} != ({m}, {n})")
        if len(self.relations) != m:
            raise ValueError("one relation per row required")
        if self.lower is None:
            self.lower = np.zeros(n)
        else:
            self.lower = np.asarray(self.lower, dtype=float)
        if self.upper is None:
            self.upper = np.full(n, np.inf)
        else:
            self.upper = np.asarray(self.upper, dtype=float)
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        for arr in (self.c, self.A, self.b):
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite entries in LP data")


@dataclass
class LpOutcome:
    status: Status
    solution: np.ndarray = None
    objective: float = np.nan


def _pivot(T, basis, row, col):
    piv = T[row, col]
    T[row] /= piv
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _run_simplex(T, basis, ncols):
    """Minimize on a tableau whose last row holds reduced costs and last
    column the rhs. Returns 'optimal' or 'unbounded'."""
    m = T.shape[0] - 1
    stall_limit = 3 * (m + ncols)
    stall = 0
    prev_obj = np.inf
    max_iters = 50 * (m + ncols) + 1000
    for _ in range(max_iters):
        z = T[-1, :ncols]
        if stall > stall_limit:
            # Bland: lowest-index negative reduced cost
            neg = np.where(z < -OPT_TOL)[0]
            if len(neg) == 0:
                return "optimal"
            col = int(neg[0])
        else:
            col = int(np.argmin(z))
            if z[col] >= -OPT_TOL:
                return "optimal"
        ratios = np.full(m, np.inf)
        pos = T[:m, col] > PIVOT_TOL * 10
        ratios[pos] = T[:m, -1][pos] / T[:m, col][pos]
        row = int(np.argmin(ratios))
        if not np.isfinite(ratios[row]):
            return "unbounded"
        # deterministic tie break: smallest basis index among min ratios
        ties = np.where(np.abs(ratios - ratios[row]) <= 1e-12)[0]
        if len(ties) > 1:
            row = int(ties[np.argmin(basis[ties])])
        if abs(T[row, col]) < PIVOT_TOL:
            raise NumericalFailure("pivot magnitude below tolerance")
        _pivot(T, basis, row, col)
        obj = T[-1, -1]
        if obj < prev_obj - 1e-12:
            stall = 0
            prev_obj = obj
        else:
            stall += 1
    raise NumericalFailure("simplex iteration limit exceeded")


def _solve_standard(c, A, b):
    """min c.x s.t. A x = b, x >= 0 with b >= 0. Returns (status, x, obj)."""
    m, n = A.shape
    art = np.eye(m)
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = art
    T[:m, -1] = b
    basis = np.arange(n, n + m)
    # phase 1: minimize sum of artificials
    T[-1, n:n + m] = 1.0
    for r in range(m):
        T[-1] -= T[r]
    status = _run_simplex(T, basis, n + m)
    phase1 = -T[-1, -1]
    if status != "optimal" or phase1 > FEAS_TOL:
        return Status.INFEASIBLE, None, np.nan
    # drive remaining artificials out of the basis
    for r in range(m):
        if basis[r] >= n:
            cols = np.where(np.abs(T[r, :n]) > 1e-9)[0]
            if len(cols):
                _pivot(T, basis, r, int(cols[0]))
    keep = basis < n
    rows = [r for r in range(m) if keep[r]]
    T2 = np.zeros((len(rows) + 1, n + 1))
    T2[:-1, :n] = T[rows][:, :n]
    T2[:-1, -1] = T[rows][:, -1]
    basis2 = basis[rows].copy()
    T2[-1, :n] = c
    for i, r in enumerate(range(len(rows))):
        T2[-1] -= T2[-1, basis2[i]] * T2[r]
    status = _run_simplex(T2, basis2, n)
    if status == "unbounded":
        return Status.UNBOUNDED, None, np.nan
    x = np.zeros(n)
    x[basis2] = T2[:-1, -1]
    return Status.OPTIMAL, x, float(c @ x)


def solve(lp: LinearProgram) -> LpOutcome:
    """Solve a general-form LP by reduction to standard form."""
    n = len(lp.c)
    sign = 1.0 if lp.sense == "min" else -1.0
    c = sign * lp.c

    # variable transform: x = lower + y (y >= 0); free -> y+ - y-
    cols = []        # (orig index, +1/-1 multiplier)
    shift = np.zeros(n)
    for j in range(n):
        lb = lp.lower[j]
        if np.isfinite(lb):
            shift[j] = lb
            cols.append((j, 1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    nstd = len(cols)
    Astd_cols = np.zeros((len(lp.b), nstd))
    cstd = np.zeros(nstd)
    for k, (j, s) in enumerate(cols):
        Astd_cols[:, k] = s * lp.A[:, j]
        cstd[k] = s * c[j]
    b = lp.b - lp.A @ shift

    rows = [Astd_cols]
    rels = list(lp.relations)
    bs = list(b)
    # finite upper bounds become extra <= rows in the shifted variables
    for j in range(n):
        ub = lp.upper[j]
        if np.isfinite(ub):
            row = np.zeros(nstd)
            for k, (jj, s) in enumerate(cols):
                if jj == j:
                    row[k] = s
            rows.append(row[None, :])
            rels.append("<=")
            bs.append(ub - shift[j])
    A2 = np.vstack(rows)
    b2 = np.asarray(bs)

    # slacks / surplus to equalities
    m = len(b2)
    slack_rows = [i for i, r in enumerate(rels) if r in ("<=", ">=")]
    S = np.zeros((m, len(slack_rows)))
    for k, i in enumerate(slack_rows):
        S[i, k] = 1.0 if rels[i] == "<=" else -1.0
    A3 = np.hstack([A2, S])
    c3 = np.concatenate([cstd, np.zeros(len(slack_rows))])
    neg = b2 < 0
    A3[neg] *= -1.0
    b3 = np.where(neg, -b2, b2)

    try:
        status, xstd, obj = _solve_standard(c3, A3, b3)
    except NumericalFailure:
        # perturbation retry: nudge the rhs, then re-check feasibility
        rng = np.random.default_rng(0)
        b3p = b3 + rng.uniform(1e-10, 1e-9, size=len(b3))
        status, xstd, obj = _solve_standard(c3, A3, b3p)

    if status != Status.OPTIMAL:
        return LpOutcome(status=status)
    x = shift.copy()
    for k, (j, s) in enumerate(cols):
        x[j] += s * xstd[k]
    val = float(lp.c @ x)
    return LpOutcome(status=Status.OPTIMAL, solution=x, objective=val)
