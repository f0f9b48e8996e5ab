"""Command-line front end: game generation, exact solving, single learner
runs, and benchmark experiments.

Every subcommand validates its whole configuration before touching the
filesystem.  Exit codes: 0 success, 2 configuration errors, 3 convergence
failures, 4 output I/O failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import dp_oracle, learners, markov_game
from .bench import (AlgorithmSpec, ExperimentConfig, OutputUnwritable,
                    emit_report, run_experiment, summary_lines)
from .dp_oracle import NotConverged
from .learners import StepSizeSchedule, ThetaSchedule
from .markov_game import ConfigInfeasible, GeneratorConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_IO = 4


class _ConfigError(ValueError):
    pass


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise _ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise _ConfigError(f"config file {path} is not valid JSON: {exc}") from exc


def _generator_from(doc: dict, seed_override: int | None) -> GeneratorConfig:
    try:
        return GeneratorConfig(
            n_states=int(doc["n_states"]),
            n_actions_a=int(doc["n_actions_a"]),
            n_actions_b=int(doc["n_actions_b"]),
            discount=float(doc["discount"]),
            reward_range=tuple(doc.get("reward_range", (-1.0, 1.0))),
            self_loop_min=float(doc.get("self_loop_min", 0.0)),
            ergodic_floor=(None if doc.get("ergodic_floor") is None
                           else float(doc["ergodic_floor"])),
            seed=int(seed_override if seed_override is not None
                     else doc.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise _ConfigError(f"bad generator config: {exc}") from exc


def _beta_from(doc: dict | None) -> StepSizeSchedule:
    if doc is None:
        return StepSizeSchedule()
    try:
        return StepSizeSchedule(kind=doc.get("kind", "poly"),
                                c=float(doc.get("c", 1.0)),
                                omega=float(doc.get("omega", 0.85)))
    except (TypeError, ValueError) as exc:
        raise _ConfigError(f"bad step-size schedule: {exc}") from exc


def _theta_from(value, override: float | None) -> ThetaSchedule:
    if override is not None:
        value = override
    try:
        return ThetaSchedule.zero() if value is None else ThetaSchedule(float(value))
    except (TypeError, ValueError) as exc:
        raise _ConfigError(f"bad theta parameter: {exc}") from exc


def _out_dir(args) -> Path:
    return Path(args.out) if args.out else Path(".")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    doc = _load_json(args.config)
    config = _generator_from(doc, args.seed)
    game = markov_game.generate_random(config)
    report = markov_game.validate(game)
    if not report.ok:
        print(f"generated game failed validation: {report.bad_rows[:3]}",
              file=sys.stderr)
        return EXIT_CONVERGENCE
    out = _out_dir(args)
    path = out / (args.name or "game.json")
    try:
        out.mkdir(parents=True, exist_ok=True)
        markov_game.save_game(game, path,
                              markov_game.generation_provenance(config))
    except OSError as exc:
        print(f"cannot write {path}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {path}")
    print(f"min self-loop probability: {game.min_self_loop():.6f}")
    print(f"R_max: {game.r_max:.6f}")
    return EXIT_OK


def cmd_solve(args) -> int:
    if args.config:
        doc = _load_json(args.config)
        game_path = doc.get("game")
        tol = float(doc.get("tolerance", 1e-8))
        max_sweeps = int(doc.get("max_sweeps", 100_000))
    else:
        game_path, tol, max_sweeps = args.game, args.tol, 100_000
    if not game_path:
        raise _ConfigError("solve needs a game file (--game or config key 'game')")
    try:
        game = markov_game.load_game(game_path)
    except (OSError, ValueError) as exc:
        raise _ConfigError(f"cannot load game {game_path}: {exc}") from exc

    try:
        q_star, residual, sweeps = dp_oracle.shapley_solve(game, tol,
                                                           max_sweeps=max_sweeps)
    except NotConverged as exc:
        print(f"not converged: residual {exc.residual:.3e} after {exc.sweeps} sweeps",
              file=sys.stderr)
        return EXIT_CONVERGENCE
    values = dp_oracle.optimal_values(q_star)
    policies = dp_oracle.extract_policies(q_star)
    out = _out_dir(args)
    path = out / "solution.json"
    try:
        out.mkdir(parents=True, exist_ok=True)
        dp_oracle.save_solution(path, q_star, values, policies, residual,
                                extra={"tolerance": tol, "sweeps": sweeps,
                                       "game_file": str(game_path)})
    except OSError as exc:
        print(f"cannot write {path}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {path}")
    print(f"sweeps: {sweeps}")
    print(f"residual: {residual:.3e}")
    return EXIT_OK if residual <= tol else EXIT_CONVERGENCE


def cmd_train(args) -> int:
    doc = _load_json(args.config) if args.config else {}
    game_path = args.game or doc.get("game")
    if not game_path:
        raise _ConfigError("train needs a game file (--game or config key 'game')")
    try:
        game = markov_game.load_game(game_path)
    except (OSError, ValueError) as exc:
        raise _ConfigError(f"cannot load game {game_path}: {exc}") from exc

    algo = args.algo or doc.get("algo", "tmql")
    iterations = args.iterations or int(doc.get("iterations", 1000))
    mode = args.mode or doc.get("mode", "restart")
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    beta = _beta_from(doc.get("beta"))
    theta = _theta_from(doc.get("theta_c", 80.0), args.theta_c)
    error_every = int(doc.get("error_every", 0))
    val_tol = float(doc.get("val_tol", 1e-9))

    y_star = None
    solution_path = doc.get("solution")
    if solution_path:
        try:
            with open(solution_path) as fh:
                sol = json.load(fh)
            y_star = markov_game.tensor_from_document(sol["state_values"])
        except (OSError, KeyError, ValueError) as exc:
            raise _ConfigError(f"cannot load solution {solution_path}: {exc}") from exc

    q0 = None
    q0_path = doc.get("q0")
    if q0_path:
        try:
            with open(q0_path) as fh:
                q0 = markov_game.tensor_from_document(json.load(fh)["q_table"])
        except (OSError, KeyError, ValueError) as exc:
            raise _ConfigError(f"cannot load q0 {q0_path}: {exc}") from exc

    try:
        q, trace = learners.run_episode(
            game, algo, beta, theta, iterations=iterations, mode=mode, q0=q0,
            rng=np.random.default_rng(seed), val_tol=val_tol, y_star=y_star,
            error_every=error_every if y_star is not None else 0)
    except ValueError as exc:
        raise _ConfigError(str(exc)) from exc

    out = _out_dir(args)
    try:
        out.mkdir(parents=True, exist_ok=True)
        q_path = out / "q_final.json"
        with open(q_path, "w") as fh:
            json.dump({"q_table": markov_game.tensor_document(q),
                       "algo": algo, "iterations": iterations, "seed": seed},
                      fh)
        trace_path = out / "trace.csv"
        trace.save_csv(trace_path)
    except OSError as exc:
        print(f"cannot write outputs under {out}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {q_path}")
    print(f"wrote {trace_path}")
    if y_star is not None:
        err = bench_mod.episode_error(y_star, q, val_tol)
        print(f"final value error: {err:.6f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    doc = _load_json(args.config)
    game_doc = doc.get("game")
    if isinstance(game_doc, dict):
        game = _generator_from(game_doc, None)
    elif isinstance(game_doc, str):
        game = game_doc
    else:
        raise _ConfigError("bench config needs 'game': generator object or file path")

    default_beta = _beta_from(doc.get("beta"))
    algo_docs = doc.get("algorithms")
    if not algo_docs:
        raise _ConfigError("bench config needs a non-empty 'algorithms' list")
    specs = []
    for entry in algo_docs:
        try:
            kind = entry["kind"]
            name = entry.get("name", kind)
        except (KeyError, TypeError) as exc:
            raise _ConfigError(f"bad algorithm entry {entry!r}: {exc}") from exc
        beta = _beta_from(entry.get("beta")) if "beta" in entry else default_beta
        theta = _theta_from(entry.get("theta_c", doc.get("theta_c", 80.0)),
                            args.theta_c if kind == "tmql" else None)
        try:
            specs.append(AlgorithmSpec(name=name, kind=kind, beta=beta, theta=theta))
        except ValueError as exc:
            raise _ConfigError(str(exc)) from exc
    if args.algo:
        specs = [s for s in specs if s.kind == args.algo or s.name == args.algo]
        if not specs:
            raise _ConfigError(f"--algo {args.algo} matches no configured algorithm")

    try:
        config = ExperimentConfig(
            game=game, algorithms=tuple(specs),
            iterations=args.iterations or int(doc.get("iterations", 1000)),
            episodes=args.episodes or int(doc.get("episodes", 50)),
            mode=args.mode or doc.get("mode", "restart"),
            base_seed=args.seed if args.seed is not None else int(doc.get("seed", 0)),
            oracle_tol=float(doc.get("oracle_tol", 1e-8)),
            val_tol=float(doc.get("val_tol", 1e-9)),
            game_mode=doc.get("game_mode", "fixed"),
            trace_every=(args.trace_every if args.trace_every is not None
                         else int(doc.get("trace_every", 0))),
        )
    except ValueError as exc:
        raise _ConfigError(str(exc)) from exc

    try:
        report = run_experiment(config)
    except NotConverged as exc:
        print(f"oracle did not converge: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE

    out = _out_dir(args)
    try:
        written = emit_report(report, out)
        plot = doc.get("plot", True) if args.plot is None else args.plot
        if plot:
            from . import figures
            written["summary_png"] = figures.save_summary_figure(
                report, out / "summary.png")
            if any(r.mean_error_trace for r in report.results):
                written["trace_png"] = figures.save_error_trace_figure(
                    report, out / "error_trace.png")
    except (OutputUnwritable, OSError) as exc:
        print(f"cannot write report: {exc}", file=sys.stderr)
        return EXIT_IO

    for path in written.values():
        print(f"wrote {path}")
    print()
    for line in summary_lines(report):
        print(line)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tmql",
        description="Minimax Q-learning toolkit for zero-sum Markov games")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a random game file")
    gen.add_argument("--config", required=True, help="generator config JSON")
    gen.add_argument("--seed", type=int, default=None, help="override the config seed")
    gen.add_argument("--out", default=None, help="output directory")
    gen.add_argument("--name", default=None, help="output file name (default game.json)")
    gen.set_defaults(func=cmd_gen)

    solve = sub.add_parser("solve", help="compute the exact solution of a game file")
    solve.add_argument("--config", default=None, help="solve config JSON")
    solve.add_argument("--game", default=None, help="game file (alternative to --config)")
    solve.add_argument("--tol", type=float, default=1e-8, help="fixed-point tolerance")
    solve.add_argument("--out", default=None, help="output directory")
    solve.set_defaults(func=cmd_solve)

    train = sub.add_parser("train", help="run one seeded learning episode")
    train.add_argument("--config", default=None, help="train config JSON")
    train.add_argument("--game", default=None, help="game file (overrides config)")
    train.add_argument("--algo", choices=("mql", "tmql"), default=None)
    train.add_argument("--iterations", type=int, default=None)
    train.add_argument("--theta-c", type=float, default=None,
                       help="second-step weight parameter c in c/(n+c)")
    train.add_argument("--mode", choices=("restart", "trajectory"), default=None)
    train.add_argument("--seed", type=int, default=None)
    train.add_argument("--out", default=None, help="output directory")
    train.set_defaults(func=cmd_train)

    bench = sub.add_parser("bench", help="run a multi-episode benchmark experiment")
    bench.add_argument("--config", required=True, help="experiment config JSON")
    bench.add_argument("--episodes", type=int, default=None)
    bench.add_argument("--iterations", type=int, default=None)
    bench.add_argument("--algo", default=None, help="restrict to one algorithm name/kind")
    bench.add_argument("--theta-c", type=float, default=None)
    bench.add_argument("--mode", choices=("restart", "trajectory"), default=None)
    bench.add_argument("--seed", type=int, default=None, help="override the base seed")
    bench.add_argument("--trace-every", type=int, default=None,
                       help="record the value error every N iterations")
    bench.add_argument("--plot", action=argparse.BooleanOptionalAction, default=None,
                       help="render PNG figures next to the reports")
    bench.add_argument("--out", default=None, help="output directory")
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (_ConfigError, ConfigInfeasible, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
