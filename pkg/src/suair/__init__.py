"""Uncertainty-driven student-teacher action advising at gridworld scale."""

from .config import ConfigError, ExperimentConfig, load_config
from .dqn import ReplayBuffer, ReplayUnderfull, StudentAgent, Transition
from .gridworld import (
    GridSpec,
    GridWorld,
    PRESETS,
    TeacherPolicy,
    make_spec,
    optimal_return,
    parse_map,
    value_iteration,
)
from .harness import (
    MetricsRow,
    RunReport,
    SeedResult,
    evaluate,
    model_accuracy,
    pretrain_teacher,
    run_experiment,
    run_single_seed,
)
from .imitation import AdviceBuffer, TeacherModel, compute_c2, maybe_train
from .network import Minibatch, Network, TrainingDivergence, copy_params
from .strategies import STRATEGIES, AdvisingConfig, ReuseGate, StepDecision
from .uncertainty import SecondaryNet, UncertaintyBuffer

__version__ = "0.1.0"

__all__ = [
    "AdviceBuffer", "AdvisingConfig", "ConfigError", "ExperimentConfig",
    "GridSpec", "GridWorld", "make_spec", "MetricsRow", "Minibatch",
    "Network", "optimal_return", "parse_map", "PRESETS", "ReplayBuffer",
    "ReplayUnderfull", "ReuseGate", "RunReport", "SecondaryNet",
    "SeedResult", "StepDecision", "STRATEGIES", "StudentAgent",
    "TeacherModel", "TeacherPolicy", "TrainingDivergence", "Transition",
    "UncertaintyBuffer", "compute_c2", "copy_params", "evaluate",
    "load_config", "maybe_train", "model_accuracy", "pretrain_teacher",
    "run_experiment", "run_single_seed", "value_iteration",
]
