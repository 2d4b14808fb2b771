"""GRPO training and evaluation loops for the surrogate policy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..evaluation import MetricReport, Prediction, ScoringContext, score
from ..geometry import point_in_bbox, scale_coordinates
from ..grpo import GrpoHyper, RolloutGroup, grpo_value_and_grad, linear_lr, policy_step
from ..parsing import ACTION_TYPES, ActionType, Mode, parse_response
from ..rewards import CoordinateSpace, RewardConfig, score_group
from ..tasks import TaskSample
from .policy import SurrogatePolicy

# step size on raw logits; the surrogate's scale, not a transformer's
SURROGATE_LR = 50.0

STAGES = {
    "think": dict(mode=Mode.THINK, dast_enabled=False),
    "dast": dict(mode=Mode.THINK, dast_enabled=True),
    "nothink": dict(mode=Mode.NOTHINK, dast_enabled=False),
}


def reward_config(stage: str = "think", **overrides) -> RewardConfig:
    """Reward settings for a training stage, in the policy's coordinate space."""
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}; expected one of {sorted(STAGES)}")
    kw = {**STAGES[stage], "coordinate_space": CoordinateSpace.RESIZED, **overrides}
    return RewardConfig(**kw)


def train(
    policy: SurrogatePolicy,
    tasks: Sequence[TaskSample],
    reward_cfg: RewardConfig,
    hyper: GrpoHyper,
    epochs: int,
    seed: int = 0,
    stage: str | None = None,
    step_offset: int = 0,
    on_epoch: Callable[[int, SurrogatePolicy], None] | None = None,
) -> tuple[SurrogatePolicy, list[dict]]:
    """Run GRPO over ``tasks`` for ``epochs`` passes.

    Each step rolls out ``hyper.group_size`` responses for one task, scores
    them, normalises rewards into advantages and accumulates the gradient;
    parameters are updated every ``hyper.grad_accumulation`` steps with a
    linearly decaying learning rate. The reference policy is the input
    policy. ``on_epoch(epoch, policy)`` runs after every epoch. Returns the
    trained copy and one trace record per step.
    """
    if not tasks:
        raise ValueError("train needs at least one task")
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    if reward_cfg.coordinate_space is not CoordinateSpace.RESIZED:
        raise ValueError("surrogate rollouts emit resized-space coordinates; use coordinate_space='resized'")
    policy = policy.copy()
    for t in tasks:
        policy.row(t)
    ref = {h: v.copy() for h, v in policy.params.items()}
    rng = np.random.default_rng(seed)
    mode = reward_cfg.mode
    n_steps = epochs * len(tasks)
    total_updates = math.ceil(n_steps / hyper.grad_accumulation)
    label = stage or ("dast" if reward_cfg.dast_enabled else mode.value)

    trace: list[dict] = []
    pending_grad = None
    pending = 0
    update = 0
    step = 0
    for epoch in range(epochs):
        for idx in rng.permutation(len(tasks)):
            task = tasks[int(idx)]
            rollouts = [policy.rollout(task, mode, rng) for _ in range(hyper.group_size)]
            parsed = [parse_response(r.text, mode) for r in rollouts]
            breakdown = score_group(task, parsed, reward_cfg)
            group = RolloutGroup(
                sample_id=task.id,
                tokens=[r.tokens for r in rollouts],
                logprobs_old=[r.logprobs for r in rollouts],
                logprobs_ref=[policy.sequence_logprobs(r.tokens, ref) for r in rollouts],
                rewards=[b.total for b in breakdown],
                texts=[r.text for r in rollouts],
            )
            res = grpo_value_and_grad([group], hyper, policy.params, ref, policy.temperature)
            if pending_grad is None:
                pending_grad = res.grad
            else:
                for h in pending_grad:
                    pending_grad[h] += res.grad[h]
            pending += 1
            lr = linear_lr(hyper.learning_rate, update, total_updates) if hyper.lr_schedule == "linear" else hyper.learning_rate
            trace.append(
                {
                    "step": step_offset + step,
                    "stage": label,
                    "epoch": epoch,
                    "update": update,
                    "sample_id": task.id,
                    "lr": lr,
                    "mean_reward": float(np.mean(group.rewards)),
                    "mean_advantage_abs": float(np.mean(np.abs(group.advantages))),
                    "objective": res.objective,
                    "kl": res.mean_kl,
                    "accuracy": float(np.mean([b.correct for b in breakdown])),
                    "mean_token_length": float(np.mean([p.token_length for p in parsed])),
                    "mean_think_length": float(np.mean([p.think_length for p in parsed])),
                }
            )
            step += 1
            if pending == hyper.grad_accumulation or step == n_steps:
                grad = {h: g / pending for h, g in pending_grad.items()}
                policy.params = policy_step(policy.params, grad, lr)
                update += 1
                pending_grad, pending = None, 0
        if on_epoch is not None:
            on_epoch(epoch, policy)
    if n_steps:
        policy.stages.append(label)
    return policy, trace


def train_stages(
    policy: SurrogatePolicy,
    tasks: Sequence[TaskSample],
    stages: Sequence[str],
    hyper: GrpoHyper,
    epochs: int,
    seed: int = 0,
    **reward_overrides,
) -> tuple[SurrogatePolicy, list[dict]]:
    """Run consecutive stages (e.g. ``["dast", "nothink"]``), ``epochs`` each."""
    trace: list[dict] = []
    for i, stage in enumerate(stages):
        cfg = reward_config(stage, **reward_overrides)
        policy, t = train(policy, tasks, cfg, hyper, epochs, seed=seed + i, stage=stage, step_offset=len(trace))
        trace.extend(t)
    return policy, trace


@dataclass
class PolicyEvaluation:
    report: MetricReport
    mean_token_length: float
    mean_think_length: float
    format_rate: float

    @property
    def accuracy(self) -> float:
        return self.report.grounding_accuracy


def evaluate_policy(
    policy: SurrogatePolicy,
    tasks: Sequence[TaskSample],
    mode: Mode | str = Mode.THINK,
    protocol: str = "screenspot",
    rng: np.random.Generator | None = None,
) -> PolicyEvaluation:
    """Greedy decoding (or sampling when ``rng`` is given), scored by the eval harness."""
    if not tasks:
        raise ValueError("evaluate_policy needs at least one task")
    mode = Mode(mode)
    outs = [policy.greedy(t, mode) if rng is None else policy.rollout(t, mode, rng) for t in tasks]
    preds = [Prediction.from_text(t.id, o.text, mode) for t, o in zip(tasks, outs)]
    ctx = ScoringContext(CoordinateSpace.RESIZED, policy.resize)
    report = score(preds, tasks, protocol, ctx)
    parsed = [parse_response(o.text, mode) for o in outs]
    return PolicyEvaluation(
        report,
        float(np.mean([p.token_length for p in parsed])),
        float(np.mean([p.think_length for p in parsed])),
        float(np.mean([p.well_formed for p in parsed])),
    )


def expected_click_accuracy(policy: SurrogatePolicy, tasks: Sequence[TaskSample]) -> float:
    """Exact expected grounding accuracy under sampling, by enumerating every cell."""
    click = ACTION_TYPES.index(ActionType.CLICK)
    scores = []
    for t in tasks:
        if t.bbox is None:
            continue
        r = policy.row(t)
        p_fmt = math.exp(policy.log_probs("format", r)[0])
        p_click = math.exp(policy.log_probs("type", r)[click])
        px = np.exp(policy.log_probs("x", r))
        py = np.exp(policy.log_probs("y", r))
        hit = 0.0
        for i in range(policy.grid):
            for j in range(policy.grid):
                pt = scale_coordinates(policy.cell_point(t.image_size, i, j), t.image_size, policy.resize)
                if point_in_bbox(pt, t.bbox):
                    hit += px[i] * py[j]
        scores.append(p_fmt * p_click * hit)
    if not scores:
        raise ValueError("no click tasks with boxes")
    return float(np.mean(scores))


__all__ = ["STAGES", "SURROGATE_LR", "PolicyEvaluation", "evaluate_policy", "expected_click_accuracy", "reward_config", "train", "train_stages"]
