from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .arch import ModelParams, TrainConfig
from .model import as_batch, loss_and_gradients


@dataclass
class TrainHistory:
    step_losses: List[float] = field(default_factory=list)
    epoch_losses: List[float] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.step_losses)


def steps_per_run(n_items: int, cfg: TrainConfig) -> int:
    return cfg.epochs * math.ceil(n_items / cfg.batch_size)


def train(params: ModelParams, images, labels, cfg: TrainConfig, history: TrainHistory = None) -> ModelParams:
    """Mini-batch Adam on softmax cross-entropy; returns new params.

    Runs ``epochs * ceil(N / batch_size)`` steps. Shuffling and per-step
    dropout seeds come from one generator seeded with ``cfg.seed``. Pass a
    ``TrainHistory`` to collect the loss trajectory.
    """
    x = as_batch(params.arch, images)
    y = np.asarray(labels, dtype=np.int64)
    n = x.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty labeled set")
    if y.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {y.shape}")

    out = params.copy()
    arrays = out.arrays()
    m = [np.zeros_like(a) for a in arrays]
    v = [np.zeros_like(a) for a in arrays]
    b1, b2 = cfg.beta1, cfg.beta2
    rng = np.random.default_rng(cfg.seed)
    t = 0
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        epoch_total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            dropout_seed = int(rng.integers(2**63))
            loss, grads = loss_and_gradients(out, x[idx], y[idx], dropout_seed)
            t += 1
            lr_t = cfg.learning_rate * math.sqrt(1 - b2**t) / (1 - b1**t)
            for a, g, mi, vi in zip(arrays, grads, m, v):
                mi *= b1
                mi += (1 - b1) * g
                vi *= b2
                vi += (1 - b2) * g * g
                a -= lr_t * mi / (np.sqrt(vi) + cfg.eps)
            epoch_total += loss * len(idx)
            if history is not None:
                history.step_losses.append(loss)
        if history is not None:
            history.epoch_losses.append(epoch_total / n)
    return out
