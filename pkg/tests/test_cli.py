"""CLI tests, driven through main(argv) so exit codes are observable."""

import json

import numpy as np
import pytest

from tmql.cli import (EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_IO, EXIT_OK, main)
from tmql.markov_game import (GeneratorConfig, generate_random, load_game,
                              save_game, tensor_from_document)

GEN_CONFIG = {
    "n_states": 4, "n_actions_a": 2, "n_actions_b": 2, "discount": 0.6,
    "reward_range": [0.0, 1.0], "self_loop_min": 0.05, "seed": 42,
}


@pytest.fixture
def gen_config(tmp_path):
    path = tmp_path / "gen.json"
    path.write_text(json.dumps(GEN_CONFIG))
    return path


@pytest.fixture
def game_file(tmp_path):
    cfg = GeneratorConfig(4, 2, 2, 0.6, reward_range=(0.0, 1.0),
                          self_loop_min=0.05, seed=42)
    path = tmp_path / "game.json"
    save_game(generate_random(cfg), path)
    return path


class TestGen:
    def test_writes_valid_game(self, gen_config, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["gen", "--config", str(gen_config), "--out", str(out)]) == EXIT_OK
        game = load_game(out / "game.json")
        assert game.min_self_loop() >= 0.05
        printed = capsys.readouterr().out
        assert "min self-loop probability" in printed
        assert "R_max" in printed

    def test_deterministic_files(self, gen_config, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["gen", "--config", str(gen_config), "--out", str(out1)])
        main(["gen", "--config", str(gen_config), "--out", str(out2)])
        assert (out1 / "game.json").read_text() == (out2 / "game.json").read_text()

    def test_seed_override_changes_game(self, gen_config, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["gen", "--config", str(gen_config), "--out", str(out1)])
        main(["gen", "--config", str(gen_config), "--out", str(out2),
              "--seed", "43"])
        assert (out1 / "game.json").read_text() != (out2 / "game.json").read_text()

    def test_infeasible_config_exits_nonzero(self, tmp_path, capsys):
        bad = dict(GEN_CONFIG, self_loop_min=0.9, ergodic_floor=0.1)
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(bad))
        assert main(["gen", "--config", str(path)]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert main(["gen", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG


class TestSolve:
    def test_solution_outputs(self, game_file, tmp_path, capsys):
        out = tmp_path / "sol"
        code = main(["solve", "--game", str(game_file), "--out", str(out),
                     "--tol", "1e-8"])
        assert code == EXIT_OK
        printed = capsys.readouterr().out
        assert "residual" in printed
        doc = json.loads((out / "solution.json").read_text())
        assert doc["residual"] <= 1e-8

    def test_constant_reward_closed_form(self, tmp_path):
        from tmql.markov_game import MarkovGame
        c = 0.8
        game = MarkovGame(1, 2, 2, np.ones((1, 2, 2, 1)), np.full((1, 2, 2), c), 0.6)
        path = tmp_path / "const.json"
        save_game(game, path)
        out = tmp_path / "sol"
        assert main(["solve", "--game", str(path), "--out", str(out)]) == EXIT_OK
        doc = json.loads((out / "solution.json").read_text())
        values = tensor_from_document(doc["state_values"])
        assert values[0] == pytest.approx(c / (1 - 0.6), abs=1e-8)

    def test_zero_discount_qstar_is_reward(self, tmp_path):
        cfg = GeneratorConfig(3, 2, 2, 0.0, seed=5)
        game = generate_random(cfg)
        path = tmp_path / "g.json"
        save_game(game, path)
        out = tmp_path / "sol"
        assert main(["solve", "--game", str(path), "--out", str(out)]) == EXIT_OK
        doc = json.loads((out / "solution.json").read_text())
        q_star = tensor_from_document(doc["q_table"])
        np.testing.assert_array_equal(q_star, game.reward)

    def test_missing_game(self, tmp_path):
        assert main(["solve", "--game", str(tmp_path / "nope.json")]) == EXIT_CONFIG

    def test_sweep_cap_exits_convergence_code(self, game_file, tmp_path):
        cfg = tmp_path / "solve.json"
        cfg.write_text(json.dumps({"game": str(game_file), "tolerance": 1e-10,
                                   "max_sweeps": 2}))
        assert main(["solve", "--config", str(cfg),
                     "--out", str(tmp_path / "sol")]) == EXIT_CONVERGENCE


class TestTrain:
    def test_trace_row_count(self, game_file, tmp_path):
        out = tmp_path / "run"
        code = main(["train", "--game", str(game_file), "--algo", "tmql",
                     "--iterations", "500", "--seed", "0", "--out", str(out)])
        assert code == EXIT_OK
        lines = (out / "trace.csv").read_text().strip().splitlines()
        assert len(lines) == 501  # header + one row per iteration

    def test_reduction_property_through_cli(self, game_file, tmp_path):
        out_m, out_t = tmp_path / "mql", tmp_path / "tz"
        main(["train", "--game", str(game_file), "--algo", "mql",
              "--iterations", "400", "--seed", "11", "--out", str(out_m)])
        # config file carrying theta_c = null encodes the zero schedule
        cfg = tmp_path / "train.json"
        cfg.write_text(json.dumps({"game": str(game_file), "algo": "tmql",
                                   "iterations": 400, "seed": 11,
                                   "theta_c": None}))
        main(["train", "--config", str(cfg), "--out", str(out_t)])
        q_m = json.loads((out_m / "q_final.json").read_text())["q_table"]
        q_t = json.loads((out_t / "q_final.json").read_text())["q_table"]
        assert q_m["values"] == q_t["values"]

    def test_precondition_rejected(self, game_file, tmp_path):
        game = load_game(game_file)
        big = np.full(game.reward.shape, 10 * game.r_max / (1 - game.discount))
        bad_q0 = tmp_path / "q0.json"
        from tmql.markov_game import tensor_document
        bad_q0.write_text(json.dumps({"q_table": tensor_document(big)}))
        cfg = tmp_path / "train.json"
        cfg.write_text(json.dumps({"game": str(game_file), "q0": str(bad_q0)}))
        assert main(["train", "--config", str(cfg),
                     "--out", str(tmp_path / "x")]) == EXIT_CONFIG

    def test_blocked_output_exits_io_code(self, game_file, tmp_path):
        blocked = tmp_path / "blocked"
        blocked.write_text("a file, not a directory")
        assert main(["train", "--game", str(game_file), "--iterations", "10",
                     "--out", str(blocked)]) == EXIT_IO

    def test_final_error_printed_with_solution(self, game_file, tmp_path, capsys):
        sol_dir = tmp_path / "sol"
        main(["solve", "--game", str(game_file), "--out", str(sol_dir)])
        cfg = tmp_path / "train.json"
        cfg.write_text(json.dumps({"game": str(game_file),
                                   "solution": str(sol_dir / "solution.json"),
                                   "iterations": 200, "seed": 1}))
        capsys.readouterr()
        assert main(["train", "--config", str(cfg),
                     "--out", str(tmp_path / "run")]) == EXIT_OK
        assert "final value error" in capsys.readouterr().out


BENCH_CONFIG = {
    "game": GEN_CONFIG,
    "algorithms": [{"name": "mql", "kind": "mql"},
                   {"name": "tmql", "kind": "tmql", "theta_c": 80.0}],
    "iterations": 300,
    "episodes": 3,
    "seed": 5,
}


class TestBench:
    @pytest.fixture
    def bench_config(self, tmp_path):
        path = tmp_path / "bench.json"
        path.write_text(json.dumps(BENCH_CONFIG))
        return path

    def test_reports_and_figures_written(self, bench_config, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["bench", "--config", str(bench_config), "--out", str(out),
                     "--trace-every", "50"])
        assert code == EXIT_OK
        assert (out / "report.csv").exists()
        assert (out / "report.json").exists()
        assert (out / "report_trace.csv").exists()
        assert (out / "summary.png").exists()
        assert (out / "error_trace.png").exists()
        printed = capsys.readouterr().out
        assert "Average Error" in printed

    def test_no_plot_flag(self, bench_config, tmp_path):
        out = tmp_path / "out"
        assert main(["bench", "--config", str(bench_config), "--out", str(out),
                     "--no-plot"]) == EXIT_OK
        assert not (out / "summary.png").exists()

    def test_determinism(self, bench_config, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["bench", "--config", str(bench_config), "--out", str(out1), "--no-plot"])
        main(["bench", "--config", str(bench_config), "--out", str(out2), "--no-plot"])
        r1 = json.loads((out1 / "report.json").read_text())
        r2 = json.loads((out2 / "report.json").read_text())
        for a, b in zip(r1["results"], r2["results"]):
            assert a["errors"] == b["errors"]

    def test_single_episode_average_is_that_episode(self, bench_config, tmp_path):
        out = tmp_path / "one"
        main(["bench", "--config", str(bench_config), "--out", str(out),
              "--episodes", "1", "--no-plot"])
        doc = json.loads((out / "report.json").read_text())
        for r in doc["results"]:
            assert r["average_error"] == r["errors"][0]

    def test_algo_filter(self, bench_config, tmp_path):
        out = tmp_path / "only"
        main(["bench", "--config", str(bench_config), "--out", str(out),
              "--algo", "mql", "--no-plot"])
        doc = json.loads((out / "report.json").read_text())
        assert [r["name"] for r in doc["results"]] == ["mql"]

    def test_empty_algorithms_rejected(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps(dict(BENCH_CONFIG, algorithms=[])))
        assert main(["bench", "--config", str(cfg)]) == EXIT_CONFIG
