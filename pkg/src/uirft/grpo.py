"""Group-relative advantages and the clipped, KL-regularised GRPO objective.

Policies are tabular categorical models: ``params`` maps a head name to a
``(rows, vocab)`` logit table, and every sampled token is identified by
``(head, row, index)``. That is all the objective needs, so anything that
can express its decisions this way can be trained with these functions.

Two evaluation paths exist on purpose. :func:`grpo_objective` works from
the per-token log-probabilities and KL values stored on a
:class:`RolloutGroup` with plain float arithmetic; :func:`grpo_value_and_grad`
batches tokens per head through the compiled kernel and returns the
analytic gradient. Tests check one against the other by finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import kernels

Params = dict[str, np.ndarray]
TokenRef = tuple[str, int, int]


@dataclass(frozen=True)
class GrpoHyper:
    epsilon: float = 0.2
    beta: float = 0.04
    group_size: int = 8
    learning_rate: float = 1.0
    lr_schedule: str = "linear"
    grad_accumulation: int = 2

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.group_size < 1:
            raise ValueError(f"group_size must be >= 1, got {self.group_size}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.lr_schedule not in ("linear", "constant"):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")
        if self.grad_accumulation < 1:
            raise ValueError(f"grad_accumulation must be >= 1, got {self.grad_accumulation}")


@dataclass
class RolloutGroup:
    """N responses sampled for one task, with everything the objective needs.

    ``logprobs_old`` are the sampling-time log-probabilities; ``logprobs_ref``
    come from the frozen reference policy. ``logprobs_current`` and ``kl``
    (exact per-token KL from current to reference) are filled by
    :func:`refresh`.
    """

    sample_id: str
    tokens: list[list[TokenRef]]
    logprobs_old: list[np.ndarray]
    logprobs_ref: list[np.ndarray]
    rewards: np.ndarray
    texts: list[str] = field(default_factory=list)
    advantages: np.ndarray | None = None
    logprobs_current: list[np.ndarray] | None = None
    kl: list[np.ndarray] | None = None

    def __post_init__(self):
        n = len(self.tokens)
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        if len(self.logprobs_old) != n or len(self.logprobs_ref) != n or len(self.rewards) != n:
            raise ValueError("rollout group lists must all have length N")
        for i, toks in enumerate(self.tokens):
            if len(self.logprobs_old[i]) != len(toks) or len(self.logprobs_ref[i]) != len(toks):
                raise ValueError(f"response {i}: per-token lists do not match its length {len(toks)}")
        if self.advantages is None:
            self.advantages = compute_advantages(self.rewards)

    def __len__(self):
        return len(self.tokens)


def compute_advantages(rewards: Sequence[float]) -> np.ndarray:
    """``(r - mean) / std`` with the population std; zero when all rewards tie."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.size == 0:
        raise ValueError("compute_advantages needs at least one reward")
    centred = r - r.mean()
    std = math.sqrt(float(np.mean(centred * centred)))
    # relative tolerance: groups of equal rewards can leave float dust in centred
    if std <= 1e-12 * max(1.0, float(np.abs(r).max())):
        return np.zeros_like(r)
    return centred / std


def _log_softmax(row: Sequence[float], inv_temp: float) -> list[float]:
    a = [v * inv_temp for v in row]
    m = max(a)
    s = m + math.log(math.fsum(math.exp(v - m) for v in a))
    return [v - s for v in a]


def token_logprobs(tokens: Sequence[TokenRef], params: Mapping[str, np.ndarray], temperature: float = 1.0) -> np.ndarray:
    inv = 1.0 / temperature
    return np.array([_log_softmax(params[h][r], inv)[k] for h, r, k in tokens], dtype=np.float64)


def token_kl(
    tokens: Sequence[TokenRef], params: Mapping[str, np.ndarray], ref: Mapping[str, np.ndarray], temperature: float = 1.0
) -> np.ndarray:
    """Exact KL(current || reference) of the distribution behind each token."""
    inv = 1.0 / temperature
    out = []
    for h, r, _ in tokens:
        lp = _log_softmax(params[h][r], inv)
        lq = _log_softmax(ref[h][r], inv)
        out.append(math.fsum(math.exp(a) * (a - b) for a, b in zip(lp, lq)))
    return np.array(out, dtype=np.float64)


def refresh(group: RolloutGroup, params: Mapping[str, np.ndarray], ref: Mapping[str, np.ndarray], temperature: float = 1.0) -> RolloutGroup:
    """Return a copy of ``group`` with current log-probs and KL under ``params``."""
    return replace(
        group,
        logprobs_current=[token_logprobs(t, params, temperature) for t in group.tokens],
        kl=[token_kl(t, params, ref, temperature) for t in group.tokens],
    )


def grpo_objective(group: RolloutGroup, hyper: GrpoHyper) -> float:
    """Clipped surrogate minus ``beta * KL``, averaged per response then over the group.

    Uses the group's stored current log-probabilities and KL values; when
    those are absent the current policy is taken to equal the old one and
    the KL term to be zero.
    """
    eps, beta = hyper.epsilon, hyper.beta
    current = group.logprobs_current if group.logprobs_current is not None else group.logprobs_old
    kl = group.kl if group.kl is not None else [np.zeros(len(t)) for t in group.tokens]
    if len(current) != len(group) or len(kl) != len(group):
        raise ValueError("current log-probs / KL do not match the group size")
    total = 0.0
    for i in range(len(group)):
        n = len(group.tokens[i])
        if len(current[i]) != n or len(kl[i]) != n:
            raise ValueError(f"response {i}: per-token lists do not match its length {n}")
        if n == 0:
            continue
        a = float(group.advantages[i])
        acc = 0.0
        for lp, lo, k in zip(current[i], group.logprobs_old[i], kl[i]):
            ratio = math.exp(lp - lo)
            clipped = min(max(ratio, 1 - eps), 1 + eps)
            acc += min(ratio * a, clipped * a) - beta * k
        total += acc / n
    return total / len(group)


@dataclass
class ObjectiveResult:
    objective: float
    grad: Params
    mean_kl: float


def grpo_value_and_grad(
    groups: Sequence[RolloutGroup],
    hyper: GrpoHyper,
    params: Mapping[str, np.ndarray],
    ref: Mapping[str, np.ndarray],
    temperature: float = 1.0,
) -> ObjectiveResult:
    """Objective summed over ``groups`` and its analytic gradient w.r.t. ``params``."""
    batches: dict[str, dict[str, list]] = {}
    for g in groups:
        n_resp = len(g)
        for i, toks in enumerate(g.tokens):
            if not toks:
                continue
            w = 1.0 / (n_resp * len(toks))
            for (h, r, k), lo in zip(toks, g.logprobs_old[i]):
                b = batches.setdefault(h, {"rows": [], "tok": [], "old": [], "adv": [], "w": []})
                b["rows"].append(r)
                b["tok"].append(k)
                b["old"].append(lo)
                b["adv"].append(g.advantages[i])
                b["w"].append(w)

    grad = {h: np.zeros_like(v, dtype=np.float64) for h, v in params.items()}
    objective = 0.0
    kl_sum = 0.0
    n_tok = 0
    inv = 1.0 / temperature
    for h, b in batches.items():
        rows = np.asarray(b["rows"], dtype=np.int64)
        obj, g_rows, _, kl = kernels.surrogate_head(
            params[h][rows],
            ref[h][rows],
            np.asarray(b["tok"], dtype=np.int64),
            np.asarray(b["old"]),
            np.asarray(b["adv"]),
            np.asarray(b["w"]),
            hyper.epsilon,
            hyper.beta,
            inv,
        )
        objective += obj
        kl_sum += float(np.sum(kl))
        n_tok += len(rows)
        np.add.at(grad[h], rows, g_rows)
    return ObjectiveResult(objective, grad, kl_sum / n_tok if n_tok else 0.0)


def grpo_gradient(group: RolloutGroup, hyper: GrpoHyper, params, ref, temperature: float = 1.0) -> Params:
    return grpo_value_and_grad([group], hyper, params, ref, temperature).grad


def linear_lr(base_lr: float, step: int, total_steps: int) -> float:
    """Linear decay from ``base_lr`` at step 0 to 0 at ``total_steps``."""
    if total_steps <= 0:
        return 0.0
    return base_lr * max(0.0, (total_steps - step) / total_steps)


def policy_step(params: Mapping[str, np.ndarray], grad: Mapping[str, np.ndarray], lr: float) -> Params:
    """Gradient ascent: ``params + lr * grad``."""
    out = {}
    for h, v in params.items():
        g = grad.get(h)
        if g is None:
            out[h] = v.copy()
            continue
        if g.shape != v.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {h!r} shape {v.shape}")
        out[h] = v + lr * g
    return out
