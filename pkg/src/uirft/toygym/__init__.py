"""Synthetic GUI environment and surrogate policy for desk-scale GRPO runs."""

from .env import DEFAULT_MIXTURE, SyntheticScreen, TaskConfig, action_histogram, apportion, click_suite, generate_tasks, make_screen
from .policy import Rollout, SurrogatePolicy, oracle_policy, weak_policy
from .train import SURROGATE_LR, PolicyEvaluation, evaluate_policy, expected_click_accuracy, reward_config, train, train_stages

__all__ = [
    "DEFAULT_MIXTURE",
    "PolicyEvaluation",
    "SURROGATE_LR",
    "Rollout",
    "SurrogatePolicy",
    "SyntheticScreen",
    "TaskConfig",
    "action_histogram",
    "apportion",
    "click_suite",
    "evaluate_policy",
    "expected_click_accuracy",
    "generate_tasks",
    "make_screen",
    "oracle_policy",
    "reward_config",
    "train",
    "train_stages",
    "weak_policy",
]
