"""Exact ground truth via Shapley Q-value iteration.

The minimax Bellman operator maps a Q-table to

    (HQ)(i, a, b) = r(i, a, b) + discount * sum_j p(j|i,a,b) * value(Q(j))

and is a sup-norm contraction with modulus equal to the discount, so
iterating it from any start converges to the unique optimal table Q*.  The
stopping rule converts the fixed-point tolerance into a residual threshold
through the standard contraction error bound, so the returned table carries
a certified accuracy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .markov_game import MarkovGame, tensor_document
from .matrix_game import solve_matrix_game, val_batch


class NotConverged(RuntimeError):
    """Value iteration hit max_sweeps; carries the last residual."""

    def __init__(self, residual: float, sweeps: int):
        super().__init__(f"residual {residual:.3e} after {sweeps} sweeps")
        self.residual = residual
        self.sweeps = sweeps


@dataclass
class PolicyPair:
    """Per-state optimal mixed strategies: player1 (S, A), player2 (S, B)."""

    player1: np.ndarray
    player2: np.ndarray


def bellman_apply(game: MarkovGame, q: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """One application of the minimax Bellman operator; q is not modified."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != game.reward.shape:
        raise ValueError(f"Q shape {q.shape} does not match game {game.reward.shape}")
    values = val_batch(q, tol)
    return game.reward + game.discount * np.tensordot(game.transition, values, axes=1)


def _residual_threshold(tol_fixed_point: float, alpha: float) -> float:
    # ||returned - Q*|| <= alpha * residual / (1 - alpha); factor capped at 1
    # keeps the threshold meaningful for small discounts.
    if alpha <= 0.0:
        return tol_fixed_point
    return tol_fixed_point * min(1.0, (1.0 - alpha) / (2.0 * alpha))


def shapley_solve(game: MarkovGame, tol_fixed_point: float = 1e-8,
                  max_sweeps: int = 100_000, val_tol: float = 1e-9,
                  ) -> tuple[np.ndarray, float, int]:
    """Iterate Q <- HQ from zero until the contraction bound certifies that
    the returned table is within tol_fixed_point of Q* in sup-norm.

    Returns (Q table, last residual ||HQ - Q||_inf, sweep count) and raises
    NotConverged if max_sweeps is exhausted first.
    """
    if tol_fixed_point <= 0.0:
        raise ValueError("tol_fixed_point must be positive")
    threshold = _residual_threshold(tol_fixed_point, game.discount)
    q = np.zeros_like(game.reward)
    residual = np.inf
    for sweep in range(1, max_sweeps + 1):
        hq = bellman_apply(game, q, val_tol)
        residual = float(np.max(np.abs(hq - q)))
        q = hq
        if residual <= threshold:
            return q, residual, sweep
    raise NotConverged(residual, max_sweeps)


def optimal_values(q: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """State values Y(i) = value of the matrix game Q(i)."""
    q = np.asarray(q, dtype=np.float64)
    return val_batch(q, tol)


def extract_policies(q: np.ndarray, tol: float = 1e-9) -> PolicyPair:
    """Optimal mixed strategies of each per-state matrix game."""
    q = np.asarray(q, dtype=np.float64)
    n_states, n_a, n_b = q.shape
    p1 = np.zeros((n_states, n_a))
    p2 = np.zeros((n_states, n_b))
    for i in range(n_states):
        sol = solve_matrix_game(q[i], tol)
        p1[i] = sol.max_strategy
        p2[i] = sol.min_strategy
    return PolicyPair(player1=p1, player2=p2)


def save_solution(path, q: np.ndarray, values: np.ndarray, policies: PolicyPair,
                  residual: float, extra: dict | None = None) -> None:
    """Write Q*, Y*, and policies in the shared shape-header JSON convention."""
    doc = {
        "q_table": tensor_document(q),
        "state_values": tensor_document(values),
        "policy_player1": tensor_document(policies.player1),
        "policy_player2": tensor_document(policies.player2),
        "residual": residual,
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh)
