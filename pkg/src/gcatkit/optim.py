"""In-place parameter updates: Adam and the plain gradient step.

Training stays in float64; both optimizers are deterministic given the
same gradient sequence, which the seeded samplers guarantee.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np


class Adam:
    """Standard Adam with bias correction (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, params: Mapping[str, np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {k: np.zeros_like(v) for k, v in self.params.items()}
        self._v = {k: np.zeros_like(v) for k, v in self.params.items()}

    def step(self, grads: Mapping[str, np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for name, p in self.params.items():
            g = grads.get(name)
            if g is None:
                continue
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


class PlainSgd:
    """The literal unscaled gradient step, kept behind the plain-sgd flag."""

    def __init__(self, params: Mapping[str, np.ndarray], lr: float):
        self.params = dict(params)
        self.lr = lr

    def step(self, grads: Mapping[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            g = grads.get(name)
            if g is not None:
                p -= self.lr * g


def make_optimizer(params: Mapping[str, np.ndarray], lr: float, plain_sgd: bool = False):
    return PlainSgd(params, lr) if plain_sgd else Adam(params, lr)
