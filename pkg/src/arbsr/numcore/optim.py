"""Adam and global-norm gradient clipping over :class:`Parameter` lists."""
from __future__ import annotations

import numpy as np


def adam_step(params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Apply one bias-corrected Adam update in place, then clear gradients."""
    for p in params:
        p.step += 1
        g = p.grad
        p.m *= beta1
        p.m += (1 - beta1) * g
        p.v *= beta2
        p.v += (1 - beta2) * g * g
        m_hat = p.m / (1 - beta1 ** p.step)
        v_hat = p.v / (1 - beta2 ** p.step)
        p.value -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.value.dtype)
        p.zero_grad()


def global_grad_norm(params) -> float:
    return float(np.sqrt(sum(float(np.sum(p.grad.astype(np.float64) ** 2)) for p in params)))


def clip_grad_norm(params, max_norm: float) -> float:
    """Rescale all gradients so their joint L2 norm is at most ``max_norm``.

    Returns the norm measured before clipping.
    """
    norm = global_grad_norm(params)
    if norm > max_norm:
        factor = max_norm / (norm + 1e-12)
        for p in params:
            p.grad *= factor
    return norm


def zero_grad(params) -> None:
    for p in params:
        p.zero_grad()
