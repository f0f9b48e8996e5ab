"""Finite discounted two-player zero-sum Markov games.

A game is the tuple (states, row actions, column actions, transition tensor,
reward tensor, discount).  Player 1 (rows) maximizes the discounted reward
stream, player 2 (columns) receives its negation.  This module covers
representation and validation, seeded random generation with an ergodicity
floor and optional self-loop mass, trajectory sampling, and a JSON file
format with generation provenance.

Games are immutable after construction and safe to share across threads;
random streams belong to a single caller each.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit

GAME_FORMAT = "zero-sum-markov-game-v1"
PRNG_NAME = "numpy.random.default_rng (PCG64)"

ROW_SUM_TOL = 1e-12


class ConfigInfeasible(ValueError):
    """Generator config asks for more probability mass than a row holds."""


class DegenerateBehavior(ValueError):
    """Behavior policy puts zero probability on some action pair."""


@njit(cache=True, inline="always")
def _pick(cum, u):
    """Index of the first cumulative bin exceeding u (inverse-CDF draw)."""
    n = cum.shape[0]
    for idx in range(n - 1):
        if u < cum[idx]:
            return idx
    return n - 1


@dataclass(frozen=True)
class MarkovGame:
    """Immutable six-tuple defining a zero-sum Markov game.

    transition has shape (S, A, B, S) with transition[i, a, b, j] the
    probability of moving to j from i under action pair (a, b); reward has
    shape (S, A, B) and pays player 1 deterministically.
    """

    n_states: int
    n_actions_a: int
    n_actions_b: int
    transition: np.ndarray
    reward: np.ndarray
    discount: float

    def __post_init__(self):
        t = np.ascontiguousarray(self.transition, dtype=np.float64)
        r = np.ascontiguousarray(self.reward, dtype=np.float64)
        shape = (self.n_states, self.n_actions_a, self.n_actions_b)
        if t.shape != shape + (self.n_states,):
            raise ValueError(f"transition shape {t.shape} != {shape + (self.n_states,)}")
        if r.shape != shape:
            raise ValueError(f"reward shape {r.shape} != {shape}")
        t.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "transition", t)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def r_max(self) -> float:
        return float(np.max(np.abs(self.reward)))

    def min_self_loop(self) -> float:
        idx = np.arange(self.n_states)
        return float(self.transition[idx, :, :, idx].min())

    def cumulative_transition(self) -> np.ndarray:
        """Row-wise cumulative transition tensor for inverse-CDF sampling."""
        return np.cumsum(self.transition, axis=-1)


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for random game generation.

    ergodic_floor is the minimum probability of every successor state in
    every transition row (None picks 1e-3 / n_states); self_loop_min is a
    guaranteed extra mass on staying in place (0 leaves the structure
    unrestricted).  Generation is a deterministic function of the seed.
    """

    n_states: int
    n_actions_a: int
    n_actions_b: int
    discount: float
    reward_range: tuple[float, float] = (-1.0, 1.0)
    self_loop_min: float = 0.0
    ergodic_floor: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_states < 1 or self.n_actions_a < 1 or self.n_actions_b < 1:
            raise ValueError("state and action counts must be >= 1")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        lo, hi = self.reward_range
        if lo > hi:
            raise ValueError("reward_range must satisfy lo <= hi")
        if self.self_loop_min < 0.0 or self.self_loop_min > 1.0:
            raise ValueError("self_loop_min must lie in [0, 1]")
        if self.ergodic_floor is not None and self.ergodic_floor < 0.0:
            raise ValueError("ergodic_floor must be >= 0")

    def resolved_floor(self) -> float:
        if self.ergodic_floor is None:
            return 1e-3 / self.n_states
        return self.ergodic_floor


class TwoStepSample(NamedTuple):
    """One two-step observation: (i, a, b, r(i,a,b), j, c, d, r(j,c,d), k)."""

    state_i: int
    action_a: int
    action_b: int
    reward_1: float
    state_j: int
    action_c: int
    action_d: int
    reward_2: float
    state_k: int

    def first_leg(self) -> "OneStepSample":
        return OneStepSample(self.state_i, self.action_a, self.action_b,
                             self.reward_1, self.state_j)


class OneStepSample(NamedTuple):
    """Single transition observation: (i, a, b, r(i,a,b), j)."""

    state_i: int
    action_a: int
    action_b: int
    reward: float
    state_j: int


@dataclass
class ValidationReport:
    """Violations found by validate(); empty lists mean the game is valid."""

    bad_rows: list = field(default_factory=list)       # (i, a, b, row_sum or min_entry)
    messages: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.bad_rows and not self.messages


def validate(game: MarkovGame) -> ValidationReport:
    """Check simplex rows, reward finiteness, and the discount range."""
    report = ValidationReport()
    sums = game.transition.sum(axis=-1)
    mins = game.transition.min(axis=-1)
    bad = np.argwhere((np.abs(sums - 1.0) > ROW_SUM_TOL) | (mins < 0.0))
    for i, a, b in bad:
        report.bad_rows.append((int(i), int(a), int(b), float(sums[i, a, b])))
    if not np.all(np.isfinite(game.reward)):
        report.messages.append("reward tensor has non-finite entries")
    if not 0.0 <= game.discount < 1.0:
        report.messages.append(f"discount {game.discount} outside [0, 1)")
    return report


def generate_random(config: GeneratorConfig) -> MarkovGame:
    """Seeded random game: normalized exponential rows mixed with the
    ergodic floor and self-loop mass, rewards uniform in reward_range.

    Draw order is fixed (transition weights, then rewards) so the same seed
    and config always produce bit-identical tensors.
    """
    eps = config.resolved_floor()
    delta = config.self_loop_min
    nS = config.n_states
    if eps * nS + delta > 1.0:
        raise ConfigInfeasible(
            f"ergodic_floor * n_states + self_loop_min = {eps * nS + delta:.4f} > 1")

    rng = np.random.default_rng(config.seed)
    shape = (nS, config.n_actions_a, config.n_actions_b)
    weights = rng.standard_exponential(shape + (nS,))
    base = weights / weights.sum(axis=-1, keepdims=True)
    transition = (1.0 - eps * nS - delta) * base + eps
    idx = np.arange(nS)
    transition[idx, :, :, idx] += delta
    lo, hi = config.reward_range
    reward = rng.uniform(lo, hi, shape)
    return MarkovGame(nS, config.n_actions_a, config.n_actions_b,
                      transition, reward, config.discount)


def sample_transition(game: MarkovGame, i: int, a: int, b: int,
                      rng: np.random.Generator) -> tuple[int, float]:
    """Draw the next state from p(.|i,a,b); the reward is the exact tensor entry."""
    cum = np.cumsum(game.transition[i, a, b])
    j = int(_pick(cum, rng.random()))
    return j, float(game.reward[i, a, b])


@dataclass(frozen=True)
class BehaviorPolicy:
    """Joint action distribution per state, shape (S, A, B), all entries > 0."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(self.probs, dtype=np.float64)
        if p.ndim != 3:
            raise ValueError("behavior probabilities must have shape (S, A, B)")
        if np.any(p <= 0.0):
            raise DegenerateBehavior("behavior policy has a zero-probability action pair")
        sums = p.reshape(p.shape[0], -1).sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError("behavior rows must sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, game: MarkovGame) -> "BehaviorPolicy":
        p = np.full((game.n_states, game.n_actions_a, game.n_actions_b),
                    1.0 / (game.n_actions_a * game.n_actions_b))
        return cls(p)

    def cumulative(self) -> np.ndarray:
        """Per-state cumulative distribution over flattened (a, b) pairs."""
        flat = self.probs.reshape(self.probs.shape[0], -1)
        return np.cumsum(flat, axis=1)


def sample_two_step(game: MarkovGame, i: int, behavior: BehaviorPolicy,
                    rng: np.random.Generator) -> TwoStepSample:
    """Draw (a,b) at i, step to j, draw (c,d) at j, step to k.

    Consumes exactly four uniform variates in a fixed order, so a seeded
    stream reproduces the same samples.
    """
    nB = game.n_actions_b
    cum_behavior = behavior.cumulative()
    cum_p = game.cumulative_transition()

    pair = int(_pick(cum_behavior[i], rng.random()))
    a, b = pair // nB, pair % nB
    j = int(_pick(cum_p[i, a, b], rng.random()))
    r1 = float(game.reward[i, a, b])

    pair2 = int(_pick(cum_behavior[j], rng.random()))
    c, d = pair2 // nB, pair2 % nB
    k = int(_pick(cum_p[j, c, d], rng.random()))
    r2 = float(game.reward[j, c, d])
    return TwoStepSample(i, a, b, r1, j, c, d, r2, k)


# ---------------------------------------------------------------------------
# JSON file format: explicit shape headers + row-major flattened tensors.
# ---------------------------------------------------------------------------

def tensor_document(array: np.ndarray) -> dict:
    """Shape header + row-major flat values for one tensor."""
    a = np.asarray(array, dtype=np.float64)
    return {"shape": list(a.shape), "values": a.ravel(order="C").tolist()}


def tensor_from_document(doc: dict) -> np.ndarray:
    return np.array(doc["values"], dtype=np.float64).reshape(doc["shape"])


def game_document(game: MarkovGame, provenance: dict | None = None) -> dict:
    doc = {
        "format": GAME_FORMAT,
        "n_states": game.n_states,
        "n_actions_a": game.n_actions_a,
        "n_actions_b": game.n_actions_b,
        "discount": game.discount,
        "transition": tensor_document(game.transition),
        "reward": tensor_document(game.reward),
    }
    if provenance is not None:
        doc["provenance"] = provenance
    return doc


def generation_provenance(config: GeneratorConfig) -> dict:
    return {
        "prng": PRNG_NAME,
        "seed": config.seed,
        "seeding": "single integer seed passed to default_rng; transition weights drawn before rewards",
        "config": {
            "n_states": config.n_states,
            "n_actions_a": config.n_actions_a,
            "n_actions_b": config.n_actions_b,
            "discount": config.discount,
            "reward_range": list(config.reward_range),
            "self_loop_min": config.self_loop_min,
            "ergodic_floor": config.resolved_floor(),
        },
    }


def save_game(game: MarkovGame, path, provenance: dict | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(game_document(game, provenance), fh)


def load_game(path) -> MarkovGame:
    """Load a game file and re-validate it; raises ValueError on violations."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != GAME_FORMAT:
        raise ValueError(f"unrecognized game file format: {doc.get('format')!r}")
    game = MarkovGame(
        n_states=int(doc["n_states"]),
        n_actions_a=int(doc["n_actions_a"]),
        n_actions_b=int(doc["n_actions_b"]),
        transition=tensor_from_document(doc["transition"]),
        reward=tensor_from_document(doc["reward"]),
        discount=float(doc["discount"]),
    )
    report = validate(game)
    if not report.ok:
        raise ValueError(f"game file failed validation: {report.bad_rows[:3]} {report.messages}")
    return game
