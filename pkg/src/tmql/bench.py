"""Benchmark harness: multi-episode learner runs scored against the exact
dynamic-programming solution.

The score of one episode is the Euclidean distance between the optimal
state values and the state values of the learned table,

    error = || Y* - value(Q_final(.)) ||_2,

averaged over independently seeded episodes, together with the average
wall-clock time of the learner loop (game generation and the oracle are
excluded from timing).  Episodes are independent given their seeds, so the
harness could run them concurrently without changing any reported number;
the implementation keeps them sequential for simplicity.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dp_oracle import bellman_apply, shapley_solve
from .learners import StepSizeSchedule, ThetaSchedule, run_episode
from .markov_game import (GeneratorConfig, MarkovGame, generate_random,
                          load_game)
from .matrix_game import val_batch


class OutputUnwritable(OSError):
    """A report or trace file could not be written."""


@dataclass(frozen=True)
class AlgorithmSpec:
    """One labeled algorithm entry: kind plus its schedules."""

    name: str
    kind: str  # "mql" or "tmql"
    beta: StepSizeSchedule = StepSizeSchedule()
    theta: ThetaSchedule = ThetaSchedule()

    def __post_init__(self):
        if self.kind not in ("mql", "tmql"):
            raise ValueError(f"unknown algorithm kind {self.kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full experiment description; validated on construction."""

    game: GeneratorConfig | str
    algorithms: tuple[AlgorithmSpec, ...]
    iterations: int = 1000
    episodes: int = 50
    mode: str = "restart"
    base_seed: int = 0
    oracle_tol: float = 1e-8
    val_tol: float = 1e-9
    game_mode: str = "fixed"  # "fixed" or "per-episode"
    trace_every: int = 0

    def __post_init__(self):
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if not self.algorithms:
            raise ValueError("experiment needs at least one algorithm")
        names = [a.name for a in self.algorithms]
        if len(set(names)) != len(names):
            raise ValueError("algorithm names must be unique")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.mode not in ("restart", "trajectory"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.game_mode not in ("fixed", "per-episode"):
            raise ValueError(f"unknown game_mode {self.game_mode!r}")
        if self.game_mode == "per-episode" and not isinstance(self.game, GeneratorConfig):
            raise ValueError("per-episode game_mode needs a generator config, not a file")
        if self.trace_every < 0:
            raise ValueError("trace_every must be >= 0")


@dataclass
class AlgorithmResult:
    name: str
    kind: str
    errors: list[float]
    times: list[float]
    average_error: float
    error_std: float
    average_time_s: float
    trace_iterations: list[int] = field(default_factory=list)
    mean_error_trace: list[float] = field(default_factory=list)


@dataclass
class ExperimentReport:
    config: dict
    seeds: list[int]
    game_mode: str
    oracle_residual: float
    oracle_sweeps: int
    oracle_warning: bool
    results: list[AlgorithmResult]

    def result(self, name: str) -> AlgorithmResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)


def episode_error(y_star: np.ndarray, q_final: np.ndarray,
                  val_tol: float = 1e-9) -> float:
    """Euclidean norm of Y* minus the state values of the learned table."""
    y_star = np.asarray(y_star, dtype=np.float64)
    values = val_batch(q_final, val_tol)
    if y_star.shape != values.shape:
        raise ValueError("Y* length does not match the table's state count")
    return float(np.linalg.norm(y_star - values))


def config_echo(config: ExperimentConfig) -> dict:
    """JSON-able snapshot of the effective experiment configuration."""
    if isinstance(config.game, GeneratorConfig):
        game = {"generator": asdict(config.game)}
        game["generator"]["reward_range"] = list(config.game.reward_range)
    else:
        game = {"file": str(config.game)}
    return {
        "game": game,
        "algorithms": [
            {"name": a.name, "kind": a.kind,
             "beta": {"kind": a.beta.kind, "c": a.beta.c, "omega": a.beta.omega},
             "theta_c": a.theta.c}
            for a in config.algorithms
        ],
        "iterations": config.iterations,
        "episodes": config.episodes,
        "mode": config.mode,
        "base_seed": config.base_seed,
        "oracle_tol": config.oracle_tol,
        "val_tol": config.val_tol,
        "game_mode": config.game_mode,
        "trace_every": config.trace_every,
    }


def _resolve_game(config: ExperimentConfig, episode: int) -> MarkovGame:
    if isinstance(config.game, GeneratorConfig):
        if config.game_mode == "per-episode":
            cfg = config.game
            cfg = GeneratorConfig(cfg.n_states, cfg.n_actions_a, cfg.n_actions_b,
                                  cfg.discount, cfg.reward_range, cfg.self_loop_min,
                                  cfg.ergodic_floor, cfg.seed + episode)
            return generate_random(cfg)
        return generate_random(config.game)
    return load_game(config.game)


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run every configured algorithm for `episodes` seeded episodes.

    The game and its exact solution are computed once in fixed-game mode
    (fresh per episode in per-episode mode); episode k of every algorithm
    uses seed base_seed + k, so algorithms see aligned sample streams and
    all error fields are deterministic functions of the configuration.
    """
    fixed = config.game_mode == "fixed"
    oracle_residual = 0.0
    oracle_sweeps = 0
    games: list[MarkovGame] = []
    y_stars: list[np.ndarray] = []
    n_games = 1 if fixed else config.episodes
    for g_idx in range(n_games):
        game = _resolve_game(config, g_idx)
        q_star, _, sweeps = shapley_solve(game, config.oracle_tol,
                                          val_tol=config.val_tol)
        recheck = float(np.max(np.abs(bellman_apply(game, q_star, config.val_tol) - q_star)))
        oracle_residual = max(oracle_residual, recheck)
        oracle_sweeps = max(oracle_sweeps, sweeps)
        games.append(game)
        y_stars.append(val_batch(q_star, config.val_tol))

    seeds = [config.base_seed + k for k in range(config.episodes)]
    results = []
    for spec in config.algorithms:
        errors: list[float] = []
        times: list[float] = []
        traces: list[np.ndarray] = []
        trace_iters: np.ndarray | None = None
        for k in range(config.episodes):
            game = games[0] if fixed else games[k]
            y_star = y_stars[0] if fixed else y_stars[k]
            rng = np.random.default_rng(seeds[k])
            t0 = time.perf_counter()
            q, trace = run_episode(
                game, spec.kind, spec.beta, spec.theta,
                iterations=config.iterations, mode=config.mode, rng=rng,
                val_tol=config.val_tol,
                y_star=y_star if config.trace_every > 0 else None,
                error_every=config.trace_every)
            times.append(time.perf_counter() - t0)
            errors.append(episode_error(y_star, q, config.val_tol))
            if config.trace_every > 0:
                traces.append(trace.error)
                trace_iters = trace.error_iterations
        result = AlgorithmResult(
            name=spec.name, kind=spec.kind, errors=errors, times=times,
            average_error=float(np.mean(errors)),
            error_std=float(np.std(errors)),
            average_time_s=float(np.mean(times)))
        if traces:
            result.trace_iterations = [int(v) for v in trace_iters]
            result.mean_error_trace = np.mean(np.vstack(traces), axis=0).tolist()
        results.append(result)

    min_error = min(r.average_error for r in results)
    warning = oracle_residual > min_error / 10.0 if min_error > 0 else False
    return ExperimentReport(config=config_echo(config), seeds=seeds,
                            game_mode=config.game_mode,
                            oracle_residual=oracle_residual,
                            oracle_sweeps=oracle_sweeps,
                            oracle_warning=warning, results=results)


# ---------------------------------------------------------------------------
# Report serialization
# ---------------------------------------------------------------------------

def report_to_dict(report: ExperimentReport) -> dict:
    return asdict(report)


def report_from_dict(doc: dict) -> ExperimentReport:
    results = [AlgorithmResult(**r) for r in doc["results"]]
    return ExperimentReport(config=doc["config"], seeds=list(doc["seeds"]),
                            game_mode=doc["game_mode"],
                            oracle_residual=doc["oracle_residual"],
                            oracle_sweeps=doc["oracle_sweeps"],
                            oracle_warning=doc["oracle_warning"],
                            results=results)


def emit_report(report: ExperimentReport, out_dir,
                formats: set[str] = frozenset({"csv", "json"}),
                basename: str = "report") -> dict[str, Path]:
    """Write the report as CSV and/or JSON; returns the written paths.

    The CSV carries one row per (algorithm, episode) followed by a summary
    block with one row per algorithm; the JSON document round-trips through
    report_from_dict without loss.
    """
    out_dir = Path(out_dir)
    written: dict[str, Path] = {}
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if "csv" in formats:
            path = out_dir / f"{basename}.csv"
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["algorithm", "episode", "seed", "error", "time_s"])
                for r in report.results:
                    for k, (err, dt) in enumerate(zip(r.errors, r.times)):
                        writer.writerow([r.name, k, report.seeds[k], repr(err), repr(dt)])
                fh.write("\n")
                writer.writerow(["algorithm", "average_error", "error_std",
                                 "average_time_s"])
                for r in report.results:
                    writer.writerow([r.name, repr(r.average_error),
                                     repr(r.error_std), repr(r.average_time_s)])
            written["csv"] = path
        if "json" in formats:
            path = out_dir / f"{basename}.json"
            with open(path, "w") as fh:
                json.dump(report_to_dict(report), fh, indent=2)
            written["json"] = path
        if any(r.mean_error_trace for r in report.results):
            path = out_dir / f"{basename}_trace.csv"
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                traced = [r for r in report.results if r.mean_error_trace]
                writer.writerow(["iteration"] + [r.name for r in traced])
                for row_idx, it in enumerate(traced[0].trace_iterations):
                    writer.writerow([it] + [repr(r.mean_error_trace[row_idx])
                                            for r in traced])
            written["trace_csv"] = path
    except OSError as exc:
        raise OutputUnwritable(f"cannot write report under {out_dir}: {exc}") from exc
    return written


def summary_lines(report: ExperimentReport) -> list[str]:
    """Fixed-width comparison table for terminal output."""
    lines = [f"{'Algorithm':<12} {'Average Error':>14} {'Average Time (s)':>17}"]
    for r in report.results:
        lines.append(f"{r.name:<12} {r.average_error:>14.4f} {r.average_time_s:>17.4f}")
    if report.oracle_warning:
        lines.append(f"warning: oracle residual {report.oracle_residual:.2e} is not "
                     f"10x below the smallest average error")
    return lines
