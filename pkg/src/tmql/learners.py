"""Tabular minimax Q-learning for zero-sum Markov games.

Two algorithms share one update skeleton.  Single-step minimax Q-learning
(MQL) moves the visited entry toward

    r(i,a,b) + discount * value(Q(j)),

while the two-step variant (TMQL) adds a decaying weight on a second
lookahead leg:

    r(i,a,b) + discount * value(Q(j))
             + discount * theta_n * (r(j,c,d) + discount * value(Q(k))).

With theta identically zero the two coincide exactly, which the tests pin
down bit-for-bit.  ``run_episode`` drives a compiled kernel over a
pre-drawn uniform stream: one stream row is consumed per iteration whether
or not the algorithm uses the second leg, so MQL and TMQL runs with the
same seed see identical first-leg samples (the aligned-stream contract the
reduction tests rely on).

A LearnerState is owned by a single run; independent episodes with
different seeds share nothing and may execute in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .markov_game import (BehaviorPolicy, MarkovGame, OneStepSample,
                          TwoStepSample, _pick)
from .matrix_game import _value_kernel


class BoundViolation(AssertionError):
    """An iterate escaped the precomputed sup-norm bound: implementation bug."""


# ---------------------------------------------------------------------------
# Schedules
# ---------------------------------------------------------------------------

_BETA_KINDS = {"poly": 0, "harmonic": 1, "constant": 2}


@dataclass(frozen=True)
class StepSizeSchedule:
    """Learning-rate schedule, always emitting values in [0, 1].

    kind "poly" is the default: beta = c / visits(i,a,b)**omega with the
    per-pair visit count, which satisfies the Robbins-Monro conditions
    (divergent sum, convergent sum of squares) along every pair's visit
    subsequence for 0.5 < omega <= 1.  kind "harmonic" uses the global step:
    beta = c / (n + 1).  kind "constant" emits c and does not satisfy
    Robbins-Monro unless c = 0.
    """

    kind: str = "poly"
    c: float = 1.0
    omega: float = 0.85

    def __post_init__(self):
        if self.kind not in _BETA_KINDS:
            raise ValueError(f"unknown step-size kind {self.kind!r}")
        if self.kind == "poly":
            if not 0.5 < self.omega <= 1.0:
                raise ValueError("poly schedule needs 0.5 < omega <= 1")
            if self.c <= 0.0:
                raise ValueError("poly schedule needs c > 0")
        elif self.kind == "harmonic":
            if self.c <= 0.0:
                raise ValueError("harmonic schedule needs c > 0")
        else:
            if not 0.0 <= self.c <= 1.0:
                raise ValueError("constant schedule needs c in [0, 1]")

    def value(self, visit_count: int, global_step: int) -> float:
        """Step size for a pair at its visit_count-th visit, global step n."""
        if self.kind == "poly":
            beta = self.c / float(visit_count) ** self.omega
        elif self.kind == "harmonic":
            beta = self.c / (global_step + 1.0)
        else:
            beta = self.c
        return min(beta, 1.0)

    def max_value(self, global_steps) -> np.ndarray:
        """Largest step size the schedule can emit at each global step.

        For the per-pair polynomial kind any step could be a pair's first
        visit, so the worst case is min(c, 1) everywhere.
        """
        n = np.asarray(global_steps, dtype=np.float64)
        if self.kind == "poly":
            return np.full_like(n, min(self.c, 1.0))
        if self.kind == "harmonic":
            return np.minimum(self.c / (n + 1.0), 1.0)
        return np.full_like(n, self.c)


@dataclass(frozen=True)
class ThetaSchedule:
    """Decaying weight on the second lookahead term: theta_n = c / (n + c).

    Values start at 1, decrease monotonically to 0, and stay in [0, 1].
    ``ThetaSchedule.zero()`` is the constant-zero schedule that turns TMQL
    into MQL.  Pair it with a step-size schedule whose tail is O(1/n^omega),
    omega > 0.5, so that sum_n beta_n * theta_n stays finite.
    """

    c: float | None = 80.0

    def __post_init__(self):
        if self.c is not None and self.c <= 0.0:
            raise ValueError("theta parameter c must be positive")

    @classmethod
    def zero(cls) -> "ThetaSchedule":
        return cls(c=None)

    @property
    def is_zero(self) -> bool:
        return self.c is None

    def value(self, global_steps):
        n = np.asarray(global_steps, dtype=np.float64)
        out = np.zeros_like(n) if self.c is None else self.c / (n + self.c)
        return float(out) if np.isscalar(global_steps) else out


def iterate_norm_bound(game: MarkovGame, theta: ThetaSchedule,
                       beta: StepSizeSchedule, horizon: int) -> float:
    """A-priori sup-norm bound on every Q iterate over `horizon` steps.

    Equals (R_max / (1 - discount)) * (1 + discount * theta_0) times the
    partial product of (1 + beta_i * theta_i * discount^2) with each beta
    taken at its worst case.  Monotone in horizon, and finite in the limit
    whenever sum beta * theta converges.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return float(iterate_norm_bound_sequence(game, theta, beta, horizon)[-1])


def iterate_norm_bound_sequence(game: MarkovGame, theta: ThetaSchedule,
                                beta: StepSizeSchedule, horizon: int) -> np.ndarray:
    """Partial products of the iterate bound: entry h bounds the table after
    any h update steps (entry 0 is the raw R_max / (1 - discount) start bound).
    """
    alpha = game.discount
    base = game.r_max / (1.0 - alpha)
    prefactor = base * (1.0 + alpha * float(theta.value(0)))
    steps = np.arange(1, horizon + 1)
    terms = beta.max_value(steps) * theta.value(steps) * alpha * alpha
    # exp of the log-sum keeps very long products finite-safe
    products = np.exp(np.cumsum(np.log1p(terms)))
    out = np.empty(horizon + 1)
    out[0] = base  # the start-table bound, before any update
    out[1:] = prefactor * products
    return out


# ---------------------------------------------------------------------------
# Learner state and single-step updates
# ---------------------------------------------------------------------------

@dataclass
class LearnerState:
    """Mutable state owned by exactly one learning run."""

    game: MarkovGame
    q: np.ndarray
    visit_counts: np.ndarray
    global_step: int = 0
    bound_m: float = np.inf
    rng: np.random.Generator | None = None
    current_state: int = 0
    check_bound: bool = False
    running_sup: float = 0.0

    @classmethod
    def fresh(cls, game: MarkovGame, q0: np.ndarray | None = None,
              rng: np.random.Generator | None = None, bound_m: float = np.inf,
              start_state: int = 0, check_bound: bool = False) -> "LearnerState":
        shape = game.reward.shape
        q = np.zeros(shape) if q0 is None else np.array(q0, dtype=np.float64)
        if q.shape != shape:
            raise ValueError(f"q0 shape {q.shape} does not match game {shape}")
        return cls(game=game, q=q, visit_counts=np.zeros(shape, dtype=np.int64),
                   bound_m=bound_m, rng=rng, current_state=start_state,
                   check_bound=check_bound, running_sup=float(np.max(np.abs(q))))


def _check_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


def _after_write(state: LearnerState, new_value: float) -> None:
    state.global_step += 1
    av = abs(new_value)
    if av > state.running_sup:
        state.running_sup = av
    if state.check_bound and state.running_sup > state.bound_m * (1.0 + 1e-6):
        raise BoundViolation(
            f"iterate sup-norm {state.running_sup:.6e} exceeds bound {state.bound_m:.6e}")


def mql_step(state: LearnerState, sample: OneStepSample, beta: float,
             val_tol: float = 1e-9) -> LearnerState:
    """One single-step update at the sampled (i, a, b); mutates state in place."""
    _check_unit("beta", beta)
    i, a, b = sample.state_i, sample.action_a, sample.action_b
    alpha = state.game.discount
    val_j = _value_kernel(state.q[sample.state_j])
    target = sample.reward + alpha * val_j
    new = (1.0 - beta) * state.q[i, a, b] + beta * target
    state.q[i, a, b] = new
    state.visit_counts[i, a, b] += 1
    _after_write(state, new)
    return state


def tmql_step(state: LearnerState, sample: TwoStepSample, beta: float,
              theta: float, val_tol: float = 1e-9) -> LearnerState:
    """One two-step update; with theta = 0 it reproduces mql_step exactly."""
    _check_unit("beta", beta)
    _check_unit("theta", theta)
    i, a, b = sample.state_i, sample.action_a, sample.action_b
    alpha = state.game.discount
    val_j = _value_kernel(state.q[sample.state_j])
    val_k = _value_kernel(state.q[sample.state_k])
    target = (sample.reward_1 + alpha * val_j
              + alpha * theta * (sample.reward_2 + alpha * val_k))
    new = (1.0 - beta) * state.q[i, a, b] + beta * target
    state.q[i, a, b] = new
    state.visit_counts[i, a, b] += 1
    _after_write(state, new)
    return state


# ---------------------------------------------------------------------------
# Episode runner
# ---------------------------------------------------------------------------

@dataclass
class StepTrace:
    """Per-iteration record of one learning run.

    sup_running holds the running maximum over iterates of the table
    sup-norm, which is exactly what the a-priori bound sequence applies to.
    error holds the Euclidean distance between the reference state values
    and the learned table's state values, measured every `error_every`
    iterations when requested.
    """

    delta: np.ndarray
    sup_running: np.ndarray
    beta: np.ndarray
    error_iterations: np.ndarray
    error: np.ndarray
    final_state: int
    samples: np.ndarray | None = None

    def save_csv(self, path) -> None:
        """Columns: iteration, sup-norm delta, value error (blank off-grid)."""
        err_at = dict(zip(self.error_iterations.tolist(), self.error.tolist()))
        with open(path, "w") as fh:
            fh.write("iteration,delta,error\n")
            for t in range(len(self.delta)):
                err = err_at.get(t + 1)
                tail = "" if err is None else repr(err)
                fh.write(f"{t + 1},{self.delta[t]!r},{tail}\n")

    def two_step_samples(self, game: MarkovGame) -> list[TwoStepSample]:
        """Reconstruct the consumed samples (requires record_samples=True)."""
        if self.samples is None:
            raise ValueError("run_episode was not asked to record samples")
        out = []
        for i, a, b, j, c, d, k in self.samples:
            out.append(TwoStepSample(int(i), int(a), int(b),
                                     float(game.reward[i, a, b]), int(j),
                                     int(c), int(d),
                                     float(game.reward[j, c, d]), int(k)))
        return out


@njit(cache=True)
def _episode_kernel(q, visits, cum_p, rewards, alpha, behavior_cum, uniforms,
                    two_step, beta_kind, beta_c, beta_omega, theta_c, theta_zero,
                    restart, start_state, step_offset, check_bound, bound_m,
                    delta_out, sup_out, beta_out, err_every, y_star, err_out,
                    record_samples, samples_out):
    n_states, _, n_b = rewards.shape
    iterations = uniforms.shape[0]
    sup = np.abs(q).max()
    cur = start_state
    err_idx = 0
    bound_limit = bound_m * (1.0 + 1e-6)
    for t in range(iterations):
        step = step_offset + t
        if restart:
            i = int(uniforms[t, 0] * n_states)
            if i >= n_states:
                i = n_states - 1
        else:
            i = cur
        pair = _pick(behavior_cum[i], uniforms[t, 1])
        a = pair // n_b
        b = pair - a * n_b
        j = _pick(cum_p[i, a, b], uniforms[t, 2])
        r1 = rewards[i, a, b]
        c = 0
        d = 0
        k = 0
        if two_step:
            pair2 = _pick(behavior_cum[j], uniforms[t, 3])
            c = pair2 // n_b
            d = pair2 - c * n_b
            k = _pick(cum_p[j, c, d], uniforms[t, 4])

        visits[i, a, b] += 1
        if beta_kind == 0:
            beta = beta_c / float(visits[i, a, b]) ** beta_omega
        elif beta_kind == 1:
            beta = beta_c / (step + 1.0)
        else:
            beta = beta_c
        if beta > 1.0:
            beta = 1.0

        val_j = _value_kernel(q[j])
        if two_step:
            theta = 0.0 if theta_zero else theta_c / (step + theta_c)
            r2 = rewards[j, c, d]
            val_k = _value_kernel(q[k])
            target = r1 + alpha * val_j + alpha * theta * (r2 + alpha * val_k)
        else:
            target = r1 + alpha * val_j
        old = q[i, a, b]
        new = (1.0 - beta) * old + beta * target
        q[i, a, b] = new

        delta_out[t] = abs(new - old)
        av = abs(new)
        if av > sup:
            sup = av
        sup_out[t] = sup
        beta_out[t] = beta
        if check_bound and sup > bound_limit:
            return cur, t, 1
        if err_every > 0 and (t + 1) % err_every == 0:
            acc = 0.0
            for s in range(n_states):
                dv = y_star[s] - _value_kernel(q[s])
                acc += dv * dv
            err_out[err_idx] = np.sqrt(acc)
            err_idx += 1
        if record_samples:
            samples_out[t, 0] = i
            samples_out[t, 1] = a
            samples_out[t, 2] = b
            samples_out[t, 3] = j
            samples_out[t, 4] = c
            samples_out[t, 5] = d
            samples_out[t, 6] = k
        if not restart:
            cur = k if two_step else j
    return cur, iterations, 0


def run_episode(game: MarkovGame, algo: str, beta: StepSizeSchedule,
                theta: ThetaSchedule, behavior: BehaviorPolicy | None = None,
                iterations: int = 1000, mode: str = "restart",
                q0: np.ndarray | None = None,
                rng: np.random.Generator | int | None = None, *,
                val_tol: float = 1e-9, y_star: np.ndarray | None = None,
                error_every: int = 0, record_samples: bool = False,
                check_bound: bool = False, start_state: int = 0,
                step_offset: int = 0) -> tuple[np.ndarray, StepTrace]:
    """Run one seeded learning episode and return (final table, trace).

    mode "restart" draws every iteration's start state uniformly, which
    realizes the every-triplet-visited-infinitely-often input contract
    directly; mode "trajectory" continues the chain from the last sampled
    state (the final state of the two-step window for TMQL, the successor
    state for MQL).  The initial table must satisfy the sup-norm bound
    R_max / (1 - discount).

    Randomness: a (iterations, 5) uniform block is drawn from `rng` up
    front and one row is consumed per iteration regardless of algorithm, so
    equal seeds align sample streams across algorithms in restart mode.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if algo not in ("mql", "tmql"):
        raise ValueError(f"unknown algorithm {algo!r}")
    if mode not in ("restart", "trajectory"):
        raise ValueError(f"unknown mode {mode!r}")
    if not 0 <= start_state < game.n_states:
        raise ValueError("start_state out of range")
    if behavior is None:
        behavior = BehaviorPolicy.uniform(game)
    if behavior.probs.shape != game.reward.shape:
        raise ValueError("behavior policy shape does not match the game")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)

    q = np.zeros_like(game.reward) if q0 is None else np.array(q0, dtype=np.float64)
    if q.shape != game.reward.shape:
        raise ValueError(f"q0 shape {q.shape} does not match game")
    start_bound = game.r_max / (1.0 - game.discount)
    q0_sup = float(np.max(np.abs(q)))
    if q0_sup > start_bound * (1.0 + 1e-12) + 1e-15:
        raise ValueError(
            f"initial table sup-norm {q0_sup:.6g} exceeds R_max/(1-discount) = {start_bound:.6g}")
    if error_every > 0:
        if y_star is None:
            raise ValueError("error_every > 0 requires reference values y_star")
        y_star = np.ascontiguousarray(y_star, dtype=np.float64)
        if y_star.shape != (game.n_states,):
            raise ValueError("y_star must have one value per state")
    else:
        y_star = np.zeros(1)

    bound_m = np.inf
    if check_bound:
        bound_m = iterate_norm_bound(game, theta, beta, step_offset + iterations)

    visits = np.zeros(game.reward.shape, dtype=np.int64)
    uniforms = rng.random((iterations, 5))
    delta_out = np.empty(iterations)
    sup_out = np.empty(iterations)
    beta_out = np.empty(iterations)
    n_err = iterations // error_every if error_every > 0 else 0
    err_out = np.empty(max(n_err, 1))
    samples_out = np.empty((iterations if record_samples else 0, 7), dtype=np.int32)

    final_state, stopped_at, status = _episode_kernel(
        q, visits, game.cumulative_transition(), game.reward, game.discount,
        behavior.cumulative(), uniforms, algo == "tmql",
        _BETA_KINDS[beta.kind], beta.c, beta.omega,
        0.0 if theta.is_zero else theta.c, theta.is_zero,
        mode == "restart", start_state, step_offset, check_bound, bound_m,
        delta_out, sup_out, beta_out, error_every, y_star, err_out,
        record_samples, samples_out)
    if status == 1:
        raise BoundViolation(
            f"iterate sup-norm {sup_out[stopped_at]:.6e} exceeded bound "
            f"{bound_m:.6e} at iteration {stopped_at + 1}")

    trace = StepTrace(
        delta=delta_out, sup_running=sup_out, beta=beta_out,
        error_iterations=np.arange(error_every, iterations + 1,
                                   error_every if error_every > 0 else iterations + 1)[:n_err],
        error=err_out[:n_err], final_state=int(final_state),
        samples=samples_out if record_samples else None)
    return q, trace
