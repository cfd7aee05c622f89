"""Adam optimizer with bias correction.

Update rule per parameter, with g the current gradient and t the
one-based step count:

    m <- beta1*m + (1-beta1)*g
    v <- beta2*v + (1-beta2)*g^2
    m_hat = m / (1 - beta1^t)
    v_hat = v / (1 - beta2^t)
    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)

Note eps sits outside the square root.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, StateError
from .tensor import Tensor


@dataclass
class AdamState:
    """First/second moment buffers and step counter for one parameter."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState) -> None:
    """Apply one in-place Adam update to ``param``."""
    if grad.shape != param.shape:
        raise ConfigError(f"adam_step gradient shape {grad.shape} != parameter shape {param.shape}")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * (grad * grad)
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    param -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class Adam:
    """Convenience wrapper driving ``adam_step`` over a parameter list."""

    params: list[Tensor]
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    states: list[AdamState] = field(init=False)

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0) or not (0.0 <= self.beta2 < 1.0):
            raise ConfigError(f"adam betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if self.eps <= 0.0:
            raise ConfigError(f"adam eps must be positive, got {self.eps}")
        self.states = [
            AdamState(m=np.zeros_like(p.data), v=np.zeros_like(p.data),
                      lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps)
            for p in self.params
        ]

    def step(self) -> None:
        for p, s in zip(self.params, self.states):
            if p.grad is None:
                raise StateError("adam step called before backward populated a gradient")
            adam_step(p.data, p.grad, s)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
