"""Mini-batch training loop."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..data import rng_for
from ..errors import DivergenceError, ShapeError
from .network import Network
from .optim import OptimizerConfig


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 10
    seed: int = 0
    shuffle: bool = True
    init: bool = True   # re-draw Glorot weights from ``seed`` before training


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    metrics: list[dict] = field(default_factory=list)


def _take(inputs, rows):
    return {k: (v[rows], m[rows]) for k, (v, m) in inputs.items()}


def train(net: Network, data, targets, opt: OptimizerConfig, cfg: TrainConfig,
          callback: Callable[[int, Network], dict] | None = None):
    """Fit ``net`` in place and return ``(net, history)``.

    Every epoch visits each row once in mini-batches of ``cfg.batch_size``;
    the loss is the weight-summed head losses. ``callback(epoch, net)`` may
    return a dict of per-epoch metrics stored in ``history.metrics``.
    """
    inputs = net.normalize_inputs(data)
    y = np.asarray(targets, dtype=np.float64).ravel()
    n = next(iter(inputs.values()))[0].shape[0]
    if y.shape[0] != n:
        raise ShapeError(f"{n} rows but {y.shape[0]} targets")
    if any(h.loss in ("bce", "cce") for h in net.heads) and not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("classification targets must be 0/1")
    if cfg.init:
        net.init_params(cfg.seed)
    shuffle_rng = rng_for(cfg.seed, "shuffle")
    dropout_rng = rng_for(cfg.seed, "dropout")
    optimizer = opt.make()
    params = net.params()
    history = TrainHistory()
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n) if cfg.shuffle else np.arange(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            rows = order[start:start + cfg.batch_size]
            loss, grads, _ = net.loss_and_grads(_take(inputs, rows), y[rows], True, dropout_rng)
            if not np.isfinite(loss):
                raise DivergenceError("non-finite loss", epoch)
            try:
                optimizer.step(params, grads)
            except DivergenceError as exc:
                raise DivergenceError(str(exc), epoch) from None
            total += loss * len(rows)
        history.loss.append(total / n)
        if callback is not None:
            history.metrics.append(callback(epoch, net) or {})
    return net, history
