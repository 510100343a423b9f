"""Plain SGD and Adam on dicts of parameter arrays."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "sgd"
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")

    def make(self) -> "Optimizer":
        return Adam(self) if self.kind == "adam" else SGD(self)


class Optimizer:
    def __init__(self, cfg: OptimizerConfig):
        self.cfg = cfg

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Update ``params`` in place."""
        for k, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise DivergenceError(f"non-finite gradient for {k}")
        self._step(params, grads)

    def _step(self, params, grads):
        raise NotImplementedError


class SGD(Optimizer):
    def _step(self, params, grads):
        lr = self.cfg.lr
        for k, g in grads.items():
            params[k] -= lr * g


class Adam(Optimizer):
    def __init__(self, cfg: OptimizerConfig):
        super().__init__(cfg)
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def _step(self, params, grads):
        c = self.cfg
        self.t += 1
        corr1 = 1.0 - c.beta1 ** self.t
        corr2 = 1.0 - c.beta2 ** self.t
        for k, g in grads.items():
            m = self.m.get(k)
            if m is None:
                m = self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            v = self.v[k]
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            params[k] -= c.lr * (m / corr1) / (np.sqrt(v / corr2) + c.eps)


def optimizer_step(state: Optimizer | None, params: dict, grads: dict, opt: OptimizerConfig):
    """Functional form: returns ``(new_params, state)`` and leaves ``params`` untouched."""
    state = opt.make() if state is None else state
    new = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    state.step(new, grads)
    return new, state
