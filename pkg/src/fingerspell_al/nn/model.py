from __future__ import annotations

from typing import Dict, List, Optional, Tuple

import numpy as np

from .arch import ArchError, ArchSpec, ModelParams
from .layers import (
    conv_backward,
    conv_forward,
    dropout_mask,
    log_softmax,
    maxpool_backward,
    maxpool_forward,
    softmax,
)

# stochastic passes over large pools are chunked; masks are drawn chunk by chunk
# from one generator, so this constant is part of the determinism contract
FORWARD_CHUNK = 256


class ShapeError(ValueError):
    pass


class LabelError(ValueError):
    pass


def _draw_layer(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def init_model(arch: ArchSpec, seed: int) -> ModelParams:
    """He-style fan-in uniform weights, zero biases."""
    if not isinstance(arch, ArchSpec):
        raise ArchError(f"expected an ArchSpec, got {type(arch).__name__}")
    arch.validate()
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for wshape, bshape in arch.param_shapes():
        fan_in = int(np.prod(wshape[:-1]))
        weights.append(_draw_layer(rng, wshape, fan_in))
        biases.append(np.zeros(bshape))
    return ModelParams(arch, weights, biases, int(seed))


def reinit_head(params: ModelParams, seed: int) -> ModelParams:
    """Copy every layer except the classification head, which is redrawn."""
    out = params.copy()
    wshape = out.weights[-1].shape
    rng = np.random.default_rng(seed)
    out.weights[-1] = _draw_layer(rng, wshape, wshape[0])
    out.biases[-1] = np.zeros(out.biases[-1].shape)
    out.init_seed = int(seed)
    return out


def as_batch(arch: ArchSpec, batch) -> np.ndarray:
    """Coerce images to (N, R, R, C) float64, checking against the arch."""
    x = np.asarray(batch, dtype=np.float64)
    r, c = arch.input_resolution, arch.input_channels
    if x.ndim == 3 and c == 1:
        x = x[..., None]
    if x.ndim != 4 or x.shape[1:] != (r, r, c):
        expected = f"(N, {r}, {r})" if c == 1 else f"(N, {r}, {r}, {c})"
        raise ShapeError(f"batch shape mismatch: expected {expected}, got {tuple(np.shape(batch))}")
    return x


def _forward(params: ModelParams, x: np.ndarray, rng: Optional[np.random.Generator], cache: bool):
    arch = params.arch
    tape = []
    h = x
    for li, (_, _, rate) in enumerate(arch.conv_blocks):
        z, cols = conv_forward(h, params.weights[li], params.biases[li])
        a = np.maximum(z, 0.0)
        pooled, arg = maxpool_forward(a)
        mask = dropout_mask(rng, pooled.shape, rate) if (rng is not None and rate > 0) else None
        out = pooled * mask if mask is not None else pooled
        if cache:
            tape.append(("conv", h.shape, cols, z, a.shape, arg, mask))
        h = out
    h = h.reshape(h.shape[0], -1)
    off = len(arch.conv_blocks)
    for j, (_, rate) in enumerate(arch.fc_layers):
        li = off + j
        z = h @ params.weights[li] + params.biases[li]
        a = np.maximum(z, 0.0)
        mask = dropout_mask(rng, a.shape, rate) if (rng is not None and rate > 0) else None
        out = a * mask if mask is not None else a
        if cache:
            tape.append(("fc", h, z, mask))
        h = out
    logits = h @ params.weights[-1] + params.biases[-1]
    if cache:
        tape.append(("head", h))
    return logits, tape


def forward_logits(params: ModelParams, batch, dropout_seed: Optional[int] = None) -> np.ndarray:
    """Pre-softmax outputs. ``dropout_seed=None`` is deterministic mode."""
    x = as_batch(params.arch, batch)
    rng = None if dropout_seed is None else np.random.default_rng(dropout_seed)
    chunks = []
    for start in range(0, x.shape[0], FORWARD_CHUNK):
        logits, _ = _forward(params, x[start:start + FORWARD_CHUNK], rng, cache=False)
        chunks.append(logits)
    if not chunks:
        return np.zeros((0, params.arch.class_count))
    return np.concatenate(chunks, axis=0)


def forward(params: ModelParams, batch, dropout_seed: Optional[int] = None) -> np.ndarray:
    """Class probabilities (batch x K).

    With ``dropout_seed=None`` dropout is disabled; inverted dropout means no
    rescaling is needed. With an integer seed, seeded dropout masks are applied
    (one MC-dropout sample).
    """
    return softmax(forward_logits(params, batch, dropout_seed))


def loss_and_gradients(
    params: ModelParams, batch, labels, dropout_seed: Optional[int] = None
) -> Tuple[float, List[np.ndarray]]:
    """Mean softmax cross-entropy and its gradients.

    Gradients are returned interleaved like ``ModelParams.arrays()``:
    ``[dW0, db0, dW1, db1, ...]``.
    """
    arch = params.arch
    x = as_batch(arch, batch)
    y = np.asarray(labels)
    if y.shape != (x.shape[0],):
        raise ShapeError(f"labels shape mismatch: expected ({x.shape[0]},), got {y.shape}")
    bad = np.flatnonzero((y < 0) | (y >= arch.class_count))
    if bad.size:
        raise LabelError(
            f"label out of range [0, {arch.class_count}) at index {int(bad[0])}: {int(y[bad[0]])}"
        )
    y = y.astype(np.int64)
    n = x.shape[0]
    rng = None if dropout_seed is None else np.random.default_rng(dropout_seed)
    logits, tape = _forward(params, x, rng, cache=True)
    logp = log_softmax(logits)
    loss = float(-logp[np.arange(n), y].mean())

    dz = np.exp(logp)
    dz[np.arange(n), y] -= 1.0
    dz /= n

    nl = params.n_layers
    grads_w: List[Optional[np.ndarray]] = [None] * nl
    grads_b: List[Optional[np.ndarray]] = [None] * nl

    _, h = tape[-1]
    grads_w[-1] = h.T @ dz
    grads_b[-1] = dz.sum(axis=0)
    dh = dz @ params.weights[-1].T

    off = len(arch.conv_blocks)
    for j in reversed(range(len(arch.fc_layers))):
        li = off + j
        _, h_in, z, mask = tape[li]
        if mask is not None:
            dh = dh * mask
        dz_l = dh * (z > 0)
        grads_w[li] = h_in.T @ dz_l
        grads_b[li] = dz_l.sum(axis=0)
        dh = dz_l @ params.weights[li].T

    if off:
        side = arch.feature_side
        dh = dh.reshape(n, side, side, arch.conv_blocks[-1][0])
    for li in reversed(range(off)):
        _, in_shape, cols, z, a_shape, arg, mask = tape[li]
        if mask is not None:
            dh = dh * mask
        da = maxpool_backward(dh, arg, a_shape)
        dz_l = da * (z > 0)
        dh, grads_w[li], grads_b[li] = conv_backward(
            dz_l, cols, in_shape, params.weights[li], need_dx=li > 0
        )

    grads = []
    for gw, gb in zip(grads_w, grads_b):
        grads.extend((gw, gb))
    return loss, grads


def predict(params: ModelParams, batch) -> np.ndarray:
    return forward_logits(params, batch).argmax(axis=1)


def evaluate(params: ModelParams, images, labels) -> Tuple[float, Dict[int, Optional[float]]]:
    """Accuracy and per-class accuracy under the deterministic forward pass.

    Classes with no test items map to ``None`` rather than 0.
    """
    y = np.asarray(labels)
    if y.size == 0:
        raise ValueError("cannot evaluate on an empty test set")
    pred = predict(params, images)
    correct = pred == y
    per_class: Dict[int, Optional[float]] = {}
    for k in range(params.arch.class_count):
        sel = y == k
        per_class[k] = float(correct[sel].mean()) if sel.any() else None
    return float(correct.mean()), per_class
