"""Dense Lemke complementary-pivot solver for mixed linear complementarity.

Solves problems of the form

* non-negative rows ``i``:  ``0 <= z_i  ⊥  (M z + r)_i >= 0``
* free rows ``i``:          ``(M z + r)_i = 0`` with ``z_i`` unrestricted

by complementary pivoting with a covering ray and a lexicographic ratio
test (so degenerate bases cannot cycle). Free variables are split into
differences of non-negative parts before pivoting.

This is the linear kernel used by the nonlinear solver: each Newton step
linearizes the residual and asks this module for an exact solution of the
piecewise-linear model, which handles combinatorial reassignments (active
set changes) that smooth damped steps cannot make in one move.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = ["MixedLCPStatus", "MixedLCPResult", "solve_mixed_lcp"]

#: Pivot candidates need at least this column entry (after row scaling).
PIVOT_TOL = 1e-10

#: Relative tie window for the lexicographic ratio test.
RATIO_TIE_TOL = 1e-9

#: Hard cap on pivots as a multiple of the (split) problem size.
PIVOT_LIMIT_FACTOR = 50


class MixedLCPStatus(Enum):
    SOLVED = "solved"
    RAY_TERMINATION = "ray_termination"
    PIVOT_LIMIT = "pivot_limit"


@dataclass(frozen=True)
class MixedLCPResult:
    status: MixedLCPStatus
    z: np.ndarray | None
    pivots: int


def _split_free(m_matrix: np.ndarray, r: np.ndarray, free: np.ndarray):
    """Rewrite free rows/variables as differences of non-negative pairs.

    Returns the expanded ``(M, q)`` plus the index arrays needed to map a
    solution of the expanded standard LCP back to the original variables.
    """
    nn_idx = np.flatnonzero(~free)
    fr_idx = np.flatnonzero(free)
    a = m_matrix[np.ix_(nn_idx, nn_idx)]
    b = m_matrix[np.ix_(nn_idx, fr_idx)]
    c = m_matrix[np.ix_(fr_idx, nn_idx)]
    d = m_matrix[np.ix_(fr_idx, fr_idx)]
    big_m = np.block(
        [
            [a, b, -b],
            [c, d, -d],
            [-c, -d, d],
        ]
    )
    q = np.concatenate([r[nn_idx], r[fr_idx], -r[fr_idx]])
    return big_m, q, nn_idx, fr_idx


def solve_mixed_lcp(
    m_matrix: np.ndarray,
    r: np.ndarray,
    free: np.ndarray,
    max_pivots: int | None = None,
) -> MixedLCPResult:
    """Solve the mixed LCP ``(M, r, free)`` by Lemke's method.

    Rows are equilibrated first (a positive row scaling leaves the solution
    set unchanged). Returns ``RAY_TERMINATION`` when the covering-ray path
    leaves the feasible region along a secondary ray, in which case no
    statement about solvability is made — callers fall back to other steps.
    """
    m_matrix = np.asarray(m_matrix, dtype=float)
    r = np.asarray(r, dtype=float)
    free = np.asarray(free, dtype=bool)
    n = r.shape[0]

    row_scale = 1.0 / np.maximum(
        1.0, np.maximum(np.abs(m_matrix).max(axis=1), np.abs(r))
    )
    m_scaled = m_matrix * row_scale[:, None]
    r_scaled = r * row_scale

    big_m, q, nn_idx, fr_idx = _split_free(m_scaled, r_scaled, free)
    nn = q.shape[0]
    n_free = fr_idx.size

    def build_solution(x: np.ndarray) -> np.ndarray:
        z = np.zeros(n)
        z[nn_idx] = x[: nn_idx.size]
        z[fr_idx] = x[nn_idx.size : nn_idx.size + n_free] - x[nn_idx.size + n_free :]
        return z

    if np.all(q >= 0.0):
        return MixedLCPResult(MixedLCPStatus.SOLVED, build_solution(np.zeros(nn)), 0)

    if max_pivots is None:
        max_pivots = PIVOT_LIMIT_FACTOR * nn

    # Tableau for  w - M x - d z0 = q  with column layout [w | x | z0].
    # tab holds the basis-inverse image of the full coefficient matrix;
    # the w block starts as the identity, so tab[:, :nn] is always B^-1,
    # which the lexicographic ratio test compares against.
    tab = np.empty((nn, 2 * nn + 1))
    tab[:, :nn] = np.eye(nn)
    tab[:, nn : 2 * nn] = -big_m
    tab[:, 2 * nn] = -1.0  # covering vector d = e
    rhs = q.copy()
    basis = np.arange(nn)  # w_i everywhere; x_i encoded as nn + i, z0 as 2 nn

    z0_col = 2 * nn

    # First pivot: bring z0 in on the row of the most negative rhs.
    row = int(np.argmin(rhs))
    entering = z0_col

    def pivot(row: int, col: int) -> None:
        piv = tab[row, col]
        tab[row] /= piv
        rhs[row] /= piv
        factors = tab[:, col].copy()
        factors[row] = 0.0
        tab[:, :] -= factors[:, None] * tab[row]
        rhs[:] -= factors * rhs[row]

    pivots = 0
    while True:
        leaving = basis[row]
        pivot(row, entering)
        basis[row] = entering
        pivots += 1
        if leaving == z0_col:
            x = np.zeros(nn)
            for rr, var in enumerate(basis):
                if nn <= var < 2 * nn:
                    x[var - nn] = rhs[rr]
            return MixedLCPResult(
                MixedLCPStatus.SOLVED, build_solution(np.maximum(x, 0.0)), pivots
            )
        if pivots > max_pivots:
            return MixedLCPResult(MixedLCPStatus.PIVOT_LIMIT, None, pivots)

        # Drive in the complement of what just left.
        entering = leaving + nn if leaving < nn else leaving - nn
        col = tab[:, entering]
        candidates = np.flatnonzero(col > PIVOT_TOL)
        if candidates.size == 0:
            return MixedLCPResult(MixedLCPStatus.RAY_TERMINATION, None, pivots)

        ratios = rhs[candidates] / col[candidates]
        best = ratios.min()
        window = best + RATIO_TIE_TOL * (1.0 + abs(best))
        tied = candidates[ratios <= window]
        if tied.size > 1 and np.any(basis[tied] == z0_col):
            # z0 must leave as soon as its row wins a ratio test.
            row = int(tied[np.argmax(basis[tied] == z0_col)])
        elif tied.size > 1:
            # Lexicographic tie-break on the basis-inverse columns.
            remaining = tied
            for j in range(nn):
                keys = tab[remaining, j] / col[remaining]
                kmin = keys.min()
                keep = keys <= kmin + RATIO_TIE_TOL * (1.0 + abs(kmin))
                remaining = remaining[keep]
                if remaining.size == 1:
                    break
            row = int(remaining[0])
        else:
            row = int(tied[0])
