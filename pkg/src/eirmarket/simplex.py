"""Dense two-phase primal simplex with Bland's rule.

This is the package's only linear-programming engine. It is deliberately
self-contained (plain numpy, no external LP library) because the LP results
serve as an *independent* verification route for the equilibrium solver:
best-response and welfare programs solved here certify the Newton solutions,
so the two routes must not share numerical machinery.

Problems are solved in standard form

    minimize    c . x
    subject to  A x = b,  x >= 0

via phase 1 (artificial variables, feasibility) and phase 2 (optimality).
Bland's smallest-index rule picks both the entering column (smallest index
with a negative reduced cost) and the leaving row (smallest basic-variable
index among the minimum-ratio ties), which guarantees finite termination on
the degenerate programs these markets produce.

:func:`solve_lp` wraps the standard form for the common mixed shape with
inequality (``A_ub x <= b_ub``) and equality (``A_eq x = b_eq``) rows and
returns the duals of both row groups (for a minimization, inequality duals
are ``<= 0``; equality duals are unsigned).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = ["LPStatus", "StandardLPResult", "LPResult", "solve_standard_lp", "solve_lp"]

#: Values within this tolerance of zero count as zero (reduced costs,
#: pivot eligibility, feasibility).
DEFAULT_TOL = 1e-9

#: Hard cap on simplex pivots; Bland's rule terminates long before this on
#: any problem this package builds.
MAX_PIVOTS = 100_000


class LPStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class StandardLPResult:
    """Outcome of a standard-form solve.

    ``duals`` holds ``y = c_B B^{-T}`` per constraint row (zeros for rows
    detected as redundant during phase 1). ``x``, ``objective`` and ``duals``
    are ``None`` unless the status is optimal.
    """

    status: LPStatus
    x: np.ndarray | None = None
    objective: float | None = None
    duals: np.ndarray | None = None


def _pivot_loop(
    A: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    basis: list[int],
    allowed: np.ndarray,
    tol: float,
) -> LPStatus:
    """Run Bland-rule pivots to optimality or unboundedness, in place."""
    m = A.shape[0]
    for _ in range(MAX_PIVOTS):
        B = A[:, basis]
        x_basic = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, c[basis])
        reduced = c - A.T @ y
        entering = -1
        for j in range(A.shape[1]):
            if allowed[j] and j not in basis and reduced[j] < -tol:
                entering = j
                break
        if entering < 0:
            return LPStatus.OPTIMAL
        d = np.linalg.solve(B, A[:, entering])
        ratios = np.full(m, np.inf)
        eligible = d > tol
        ratios[eligible] = x_basic[eligible] / d[eligible]
        if not np.any(eligible):
            return LPStatus.UNBOUNDED
        best = ratios.min()
        leaving = min(
            (basis[i], i) for i in range(m) if eligible[i] and ratios[i] <= best + tol
        )[1]
        basis[leaving] = entering
    raise RuntimeError("simplex failed to terminate within the pivot budget")


def solve_standard_lp(
    c: np.ndarray, A: np.ndarray, b: np.ndarray, tol: float = DEFAULT_TOL
) -> StandardLPResult:
    """Solve ``min c.x  s.t.  A x = b, x >= 0`` by two-phase simplex."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    if b.shape != (m,) or c.shape != (n,):
        raise ValueError("inconsistent LP dimensions")

    # Normalize to b >= 0 so the artificial basis is feasible; remember the
    # flips to restore dual signs afterwards.
    flip = b < 0.0
    A = np.where(flip[:, None], -A, A)
    b = np.where(flip, -b, b)

    # Phase 1: artificial variables with unit cost.
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    basis = list(range(n, n + m))
    allowed = np.ones(n + m, dtype=bool)
    status = _pivot_loop(A1, b, c1, basis, allowed, tol)
    if status is not LPStatus.OPTIMAL:  # phase 1 is always bounded below by 0
        raise RuntimeError("phase 1 terminated abnormally")
    x1 = np.zeros(n + m)
    x1[basis] = np.linalg.solve(A1[:, basis], b)
    if float(c1 @ x1) > tol * max(1.0, float(np.abs(b).sum())):
        return StandardLPResult(status=LPStatus.INFEASIBLE)

    # Drive remaining artificials out of the basis; rows where no original
    # column can pivot are linearly dependent and get dropped.
    redundant: list[int] = []
    for i in range(m):
        if basis[i] < n:
            continue
        B = A1[:, basis]
        w = np.linalg.solve(B.T, np.eye(m)[i])
        row = w @ A
        pivot_col = -1
        for j in range(n):
            if j not in basis and abs(row[j]) > tol:
                pivot_col = j
                break
        if pivot_col >= 0:
            basis[i] = pivot_col
        else:
            redundant.append(i)

    keep = [i for i in range(m) if i not in redundant]
    A_kept = A[keep]
    b_kept = b[keep]
    basis_kept = [basis[i] for i in keep]
    if any(idx >= n for idx in basis_kept):  # pragma: no cover - defensive
        raise RuntimeError("artificial variable left basic on a kept row")

    # Phase 2 on the original columns.
    allowed2 = np.ones(n, dtype=bool)
    status = _pivot_loop(A_kept, b_kept, c, basis_kept, allowed2, tol)
    if status is LPStatus.UNBOUNDED:
        return StandardLPResult(status=LPStatus.UNBOUNDED)

    B = A_kept[:, basis_kept]
    x = np.zeros(n)
    x[basis_kept] = np.linalg.solve(B, b_kept)
    y_kept = np.linalg.solve(B.T, c[basis_kept])
    duals = np.zeros(m)
    duals[keep] = y_kept
    duals = np.where(flip, -duals, duals)
    return StandardLPResult(
        status=LPStatus.OPTIMAL,
        x=x,
        objective=float(c @ x),
        duals=duals,
    )


@dataclass(frozen=True)
class LPResult:
    """Outcome of a mixed inequality/equality solve (original variables
    only; the slack block is stripped)."""

    status: LPStatus
    x: np.ndarray | None = None
    objective: float | None = None
    ineq_duals: np.ndarray | None = None
    eq_duals: np.ndarray | None = None


def solve_lp(
    c: np.ndarray,
    a_ub: np.ndarray | None = None,
    b_ub: np.ndarray | None = None,
    a_eq: np.ndarray | None = None,
    b_eq: np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
) -> LPResult:
    """Solve ``min c.x  s.t.  a_ub x <= b_ub, a_eq x = b_eq, x >= 0``."""
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    rows_ub = 0 if a_ub is None else np.asarray(a_ub).shape[0]
    rows_eq = 0 if a_eq is None else np.asarray(a_eq).shape[0]
    blocks = []
    if rows_ub:
        blocks.append(
            np.hstack([np.asarray(a_ub, dtype=float), np.eye(rows_ub)])
        )
    if rows_eq:
        blocks.append(
            np.hstack(
                [np.asarray(a_eq, dtype=float), np.zeros((rows_eq, rows_ub))]
            )
        )
    if not blocks:
        raise ValueError("LP needs at least one constraint row")
    A = np.vstack(blocks)
    b = np.concatenate(
        [
            np.asarray(b_ub, dtype=float) if rows_ub else np.empty(0),
            np.asarray(b_eq, dtype=float) if rows_eq else np.empty(0),
        ]
    )
    c_full = np.concatenate([c, np.zeros(rows_ub)])
    res = solve_standard_lp(c_full, A, b, tol=tol)
    if res.status is not LPStatus.OPTIMAL:
        return LPResult(status=res.status)
    return LPResult(
        status=LPStatus.OPTIMAL,
        x=res.x[:n],
        objective=res.objective,
        ineq_duals=res.duals[:rows_ub] if rows_ub else np.empty(0),
        eq_duals=res.duals[rows_ub:] if rows_eq else np.empty(0),
    )
