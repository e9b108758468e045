"""Adam with linear warmup / linear-decay-to-zero schedule and global
gradient-norm clipping."""

from __future__ import annotations

import numpy as np

from ..errors import StructuralError

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


def learning_rate(base: float, step: int, warmup_steps: int, total_steps: int) -> float:
    """base * step/warmup during warmup, then linear decay to zero at
    total_steps.  total_steps <= 0 disables the decay."""
    if step < 1:
        raise StructuralError(f"step must be >= 1, got {step}")
    if warmup_steps > 0 and step <= warmup_steps:
        return base * step / warmup_steps
    if total_steps <= 0:
        return base
    if total_steps <= warmup_steps:
        return 0.0
    return base * max(0.0, (total_steps - step) / (total_steps - warmup_steps))


class Adam:
    """Standard Adam (beta1=0.9, beta2=0.999, eps=1e-8) over a dict of
    named parameter arrays, updated in place."""

    def __init__(self, params: dict[str, np.ndarray], lr: float, warmup_steps: int = 0, total_steps: int = 0, clip_norm: float = 1.0):
        self.params = params
        self.base_lr = lr
        self.warmup_steps = warmup_steps
        self.total_steps = total_steps
        self.clip_norm = clip_norm
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads) -> float:
        """Clip, then apply one Adam update; returns the lr used."""
        self.step_count += 1
        t = self.step_count
        grads.clip_(self.clip_norm)
        lr = learning_rate(self.base_lr, t, self.warmup_steps, self.total_steps)
        bc1 = 1.0 - BETA1**t
        bc2 = 1.0 - BETA2**t
        for key, p in self.params.items():
            g = grads[key]
            m = self.m[key]
            v = self.v[key]
            m *= BETA1
            m += (1.0 - BETA1) * g
            v *= BETA2
            v += (1.0 - BETA2) * np.square(g)
            p -= (lr / bc1) * m / (np.sqrt(v / bc2) + EPS)
        return lr
