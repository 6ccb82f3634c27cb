"""Bias-corrected Adam over an ordered parameter list."""

import numpy as np


class AdamState:
    """First/second moment accumulators aligned with a fixed parameter order."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.values) for p in params]
        self.v = [np.zeros_like(p.values) for p in params]


def global_norm(grads):
    return float(np.sqrt(sum(float(np.sum(np.square(g))) for g in grads)))


def adam_step(params, grads, state: AdamState, lr, clip_norm=None):
    """One in-place update; order of params must match the state's. Returns the
    (pre-clip) global gradient norm."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ValueError("params/grads/state lengths disagree")
    norm = global_norm(grads)
    if clip_norm is not None and norm > clip_norm > 0:
        grads = [g * (clip_norm / norm) for g in grads]
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**state.t
    correction2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.values.shape:
            raise ValueError(f"grad shape {g.shape} != param shape {p.values.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        m_hat = m / correction1
        v_hat = v / correction2
        p.values -= (lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.values.dtype)
    return norm
