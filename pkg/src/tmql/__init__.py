"""Minimax Q-learning toolkit for two-player zero-sum Markov games.

Subpackages:
    matrix_game  exact values and optimal strategies of matrix games
    markov_game  game representation, generation, sampling, file format
    dp_oracle    Shapley Q-value iteration ground truth
    learners     single-step and two-step minimax Q-learning
    bench        multi-episode benchmark harness
    figures      matplotlib rendering of benchmark reports
    cli          command-line front end (gen / solve / train / bench)
"""

from .bench import (AlgorithmSpec, ExperimentConfig, ExperimentReport,
                    episode_error, run_experiment)
from .dp_oracle import (PolicyPair, bellman_apply, extract_policies,
                        optimal_values, shapley_solve)
from .learners import (LearnerState, StepSizeSchedule, StepTrace,
                       ThetaSchedule, iterate_norm_bound, mql_step,
                       run_episode, tmql_step)
from .markov_game import (BehaviorPolicy, GeneratorConfig, MarkovGame,
                          OneStepSample, TwoStepSample, generate_random,
                          load_game, sample_transition, sample_two_step,
                          save_game, validate)
from .matrix_game import MatrixGameSolution, solve_matrix_game, val, val_batch

__version__ = "0.1.0"

__all__ = [
    "AlgorithmSpec", "BehaviorPolicy", "ExperimentConfig", "ExperimentReport",
    "GeneratorConfig", "LearnerState", "MarkovGame", "MatrixGameSolution",
    "OneStepSample", "PolicyPair", "StepSizeSchedule", "StepTrace",
    "ThetaSchedule", "TwoStepSample", "bellman_apply", "episode_error",
    "extract_policies", "generate_random", "iterate_norm_bound", "load_game",
    "mql_step", "optimal_values", "run_episode", "run_experiment",
    "sample_transition", "sample_two_step", "save_game", "shapley_solve",
    "solve_matrix_game", "tmql_step", "val", "val_batch", "validate",
]
