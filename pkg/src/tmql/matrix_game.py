"""Exact values and optimal mixed strategies of finite zero-sum matrix games.

The value of a payoff matrix M (payoffs to the row maximizer) is

    value(M) = min over column mixtures y of  max over row mixtures x of  x' M y.

It is computed by the classic reduction to a linear program: shift M so every
entry is positive, solve ``max 1'w  s.t.  M w <= 1, w >= 0`` with a dense
primal simplex, and read the row player's strategy off the dual (the reduced
costs of the slack columns).  Dantzig pivoting runs first; after a fixed
budget the pivot rule falls back to Bland's rule, which cannot cycle.

All functions here are pure and safe to call from multiple threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


class NonFiniteEntry(ValueError):
    """A payoff matrix contains NaN or infinite entries."""


class SolverFailure(RuntimeError):
    """The simplex did not certify optimality within its iteration cap."""


_STATUS_OK = 0
_STATUS_PIVOT_LIMIT = 1
_STATUS_DEGENERATE = 2


@dataclass
class MatrixGameSolution:
    """Value of a matrix game plus optimal mixed strategies for both players.

    ``certificate_gap`` is the difference between the ceiling the column
    player's strategy guarantees and the floor the row player's strategy
    guarantees; at an exact optimum it is zero.
    """

    value: float
    max_strategy: np.ndarray
    min_strategy: np.ndarray
    certificate_gap: float


@njit(cache=True)
def _solve_kernel(M, use_precheck):
    """Return (value, row strategy, column strategy, status) for payoff M.

    The pure-saddle pre-check short-circuits matrices whose maximin equals
    their minimax; the value it returns is exact, so it agrees with the LP
    path to within solver tolerance by construction.
    """
    m, n = M.shape
    x = np.zeros(m)
    y = np.zeros(n)

    if use_precheck:
        best_row = 0
        maximin = -np.inf
        for i in range(m):
            rmin = M[i, 0]
            for j in range(1, n):
                if M[i, j] < rmin:
                    rmin = M[i, j]
            if rmin > maximin:
                maximin = rmin
                best_row = i
        best_col = 0
        minimax = np.inf
        for j in range(n):
            cmax = M[0, j]
            for i in range(1, m):
                if M[i, j] > cmax:
                    cmax = M[i, j]
            if cmax < minimax:
                minimax = cmax
                best_col = j
        if maximin == minimax:
            x[best_row] = 1.0
            y[best_col] = 1.0
            return maximin, x, y, 0

    # Shift so the smallest entry is exactly 1; the game value is then
    # positive and the normalized LP below is feasible and bounded.
    lo = M[0, 0]
    for i in range(m):
        for j in range(n):
            if M[i, j] < lo:
                lo = M[i, j]
    shift = 1.0 - lo

    # Tableau for: max 1'w  s.t. (M + shift) w <= 1, w >= 0.
    # Columns: n game variables, m slacks, rhs.  Slacks give a feasible basis.
    width = n + m + 1
    T = np.zeros((m + 1, width))
    for i in range(m):
        for j in range(n):
            T[i, j] = M[i, j] + shift
        T[i, n + i] = 1.0
        T[i, width - 1] = 1.0
    for j in range(n):
        T[m, j] = -1.0
    basis = np.empty(m, np.int64)
    for i in range(m):
        basis[i] = n + i

    opt_eps = 1e-12
    piv_eps = 1e-11
    dantzig_budget = 25 * (m + n) + 50
    max_pivots = 500 * (m + n) + 1000
    pivots = 0
    while True:
        col = -1
        if pivots < dantzig_budget:
            best = -opt_eps
            for j in range(width - 1):
                if T[m, j] < best:
                    best = T[m, j]
                    col = j
        else:
            # Bland: first improving column, lowest-index ties below.
            for j in range(width - 1):
                if T[m, j] < -opt_eps:
                    col = j
                    break
        if col == -1:
            break
        row = -1
        best_ratio = np.inf
        for i in range(m):
            a = T[i, col]
            if a > piv_eps:
                r = T[i, width - 1] / a
                if row == -1 or r < best_ratio - 1e-12:
                    row = i
                    best_ratio = r
                elif r <= best_ratio + 1e-12 and basis[i] < basis[row]:
                    row = i
                    if r < best_ratio:
                        best_ratio = r
        if row == -1:
            return 0.0, x, y, _STATUS_DEGENERATE
        piv = T[row, col]
        inv = 1.0 / piv
        for j2 in range(width):
            T[row, j2] *= inv
        T[row, col] = 1.0
        for i in range(m + 1):
            if i != row:
                f = T[i, col]
                if f != 0.0:
                    for j2 in range(width):
                        T[i, j2] -= f * T[row, j2]
                    T[i, col] = 0.0
        basis[row] = col
        pivots += 1
        if pivots >= max_pivots:
            return 0.0, x, y, _STATUS_PIVOT_LIMIT

    total = T[m, width - 1]  # = 1 / value of the shifted game
    if total <= 0.0:
        return 0.0, x, y, _STATUS_DEGENERATE
    for i in range(m):
        if basis[i] < n:
            y[basis[i]] = T[i, width - 1]
    for i in range(m):
        x[i] = T[m, n + i]
    sx = 0.0
    sy = 0.0
    for i in range(m):
        if x[i] < 0.0:
            x[i] = 0.0
        sx += x[i]
    for j in range(n):
        if y[j] < 0.0:
            y[j] = 0.0
        sy += y[j]
    for i in range(m):
        x[i] /= sx
    for j in range(n):
        y[j] /= sy
    return 1.0 / total - shift, x, y, _STATUS_OK


@njit(cache=True)
def _value_kernel(M):
    v, _, _, status = _solve_kernel(M, True)
    return v if status == _STATUS_OK else np.nan


@njit(cache=True)
def _val_batch_kernel(stack):
    out = np.empty(stack.shape[0])
    for s in range(stack.shape[0]):
        out[s] = _value_kernel(stack[s])
    return out


def _as_payoff(M) -> np.ndarray:
    M = np.ascontiguousarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise ValueError(f"payoff matrix must be 2-D and non-empty, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NonFiniteEntry("payoff matrix has non-finite entries")
    return M


def solve_matrix_game(M, tol: float = 1e-9, _use_precheck: bool = True) -> MatrixGameSolution:
    """Solve the zero-sum matrix game M exactly.

    Returns the game value plus mixed strategies such that the row strategy
    guarantees at least ``value - tol`` against every pure column and the
    column strategy concedes at most ``value + tol`` against every pure row.

    Raises NonFiniteEntry for NaN/inf payoffs and SolverFailure if the
    simplex hits its iteration cap or the certified gap exceeds ``tol``
    (both signal a degenerate instance, not a user error).
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    M = _as_payoff(M)
    value, x, y, status = _solve_kernel(M, _use_precheck)
    if status == _STATUS_PIVOT_LIMIT:
        raise SolverFailure("simplex hit its pivot cap before certifying optimality")
    if status == _STATUS_DEGENERATE:
        raise SolverFailure("simplex lost feasibility (degenerate instance)")
    floor = float(np.min(x @ M))   # worst case over pure columns
    ceiling = float(np.max(M @ y))  # worst case over pure rows
    gap = max(ceiling - floor, 0.0)
    if gap > tol:
        raise SolverFailure(f"certificate gap {gap:.3e} exceeds tol {tol:.3e}")
    return MatrixGameSolution(value=float(value), max_strategy=x, min_strategy=y,
                              certificate_gap=gap)


def val(M, tol: float = 1e-9) -> float:
    """Value of the matrix game M; same numeric result as solve_matrix_game."""
    return solve_matrix_game(M, tol).value


def val_batch(matrices, tol: float = 1e-9) -> np.ndarray:
    """Game values of a stack of payoff matrices, shape (k, m, n) -> (k,).

    Used for per-state values of a Q-table; skips the per-call certificate
    for speed but runs the identical solver, so values match ``val`` bitwise.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    stack = np.ascontiguousarray(matrices, dtype=np.float64)
    if stack.ndim != 3:
        raise ValueError(f"expected a (k, m, n) stack, got shape {stack.shape}")
    if not np.all(np.isfinite(stack)):
        raise NonFiniteEntry("payoff stack has non-finite entries")
    out = _val_batch_kernel(stack)
    if not np.all(np.isfinite(out)):
        raise SolverFailure("solver failed on at least one matrix in the stack")
    return out
