"""Pure-numpy implementations of the hot kernels (fallback backend)."""

import numpy as np


def log_softmax_rows(z, inv_temp=1.0):
    a = np.asarray(z, dtype=np.float64) * inv_temp
    m = a.max(axis=-1, keepdims=True)
    return a - m - np.log(np.exp(a - m).sum(axis=-1, keepdims=True))


def surrogate_head(z, zref, tokens, old_logp, adv, weight, eps, beta, inv_temp):
    """Clipped surrogate minus exact KL for a batch of tokens from one head.

    Row ``t`` of ``z`` / ``zref`` holds the current / reference logits that
    produced token ``tokens[t]``. Each token contributes
    ``weight[t] * (min(r A, clip(r) A) - beta * KL_t)``.

    Returns ``(objective, grad, logp, kl)`` where ``grad`` is the gradient of
    the objective with respect to ``z`` (same shape) and ``logp`` / ``kl`` are
    the per-token current log-probabilities and KL values.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    if n == 0:
        return 0.0, np.zeros_like(z), np.zeros(0), np.zeros(0)
    tokens = np.asarray(tokens, dtype=np.int64)
    adv = np.asarray(adv, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    logp_all = log_softmax_rows(z, inv_temp)
    logq_all = log_softmax_rows(zref, inv_temp)
    p = np.exp(logp_all)
    rows = np.arange(n)
    logp = logp_all[rows, tokens]
    ratio = np.exp(logp - np.asarray(old_logp, dtype=np.float64))
    surr = np.minimum(ratio * adv, np.clip(ratio, 1 - eps, 1 + eps) * adv)
    diff = logp_all - logq_all
    kl = (p * diff).sum(axis=1)
    objective = float((weight * (surr - beta * kl)).sum())

    clipped = ((adv > 0) & (ratio > 1 + eps)) | ((adv < 0) & (ratio < 1 - eps))
    coef = np.where(clipped, 0.0, adv * ratio)
    onehot = np.zeros_like(p)
    onehot[rows, tokens] = 1.0
    grad = coef[:, None] * (onehot - p) - beta * p * (diff - kl[:, None])
    grad *= (weight * inv_temp)[:, None]
    return objective, grad, logp, kl
