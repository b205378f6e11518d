"""Forward/backward primitives, channels-last (N, H, W, C), float64."""

import numpy as np


def conv_forward(x, w, b):
    """Stride-1 'same' convolution via im2col.

    x: (N, H, W, C), w: (k, k, C, F), b: (F,). Returns out (N, H, W, F)
    and the im2col buffer needed by the backward pass.
    """
    n, h, wd, c = x.shape
    k = w.shape[0]
    p = k // 2
    if p:
        xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
    else:
        xp = x
    cols = np.empty((n, h, wd, k, k, c))
    for i in range(k):
        for j in range(k):
            cols[:, :, :, i, j, :] = xp[:, i:i + h, j:j + wd, :]
    cols = cols.reshape(n * h * wd, k * k * c)
    out = cols @ w.reshape(k * k * c, -1) + b
    return out.reshape(n, h, wd, -1), cols


def conv_backward(dout, cols, x_shape, w, need_dx=True):
    n, h, wd, c = x_shape
    k = w.shape[0]
    p = k // 2
    f = w.shape[3]
    d2 = dout.reshape(-1, f)
    dw = (cols.T @ d2).reshape(w.shape)
    db = d2.sum(axis=0)
    if not need_dx:
        return None, dw, db
    dcols = (d2 @ w.reshape(k * k * c, f).T).reshape(n, h, wd, k, k, c)
    dxp = np.zeros((n, h + 2 * p, wd + 2 * p, c))
    for i in range(k):
        for j in range(k):
            dxp[:, i:i + h, j:j + wd, :] += dcols[:, :, :, i, j, :]
    return dxp[:, p:p + h, p:p + wd, :], dw, db


def maxpool_forward(x):
    """2x2 max-pool, stride 2; odd trailing rows/columns are dropped."""
    n, h, w, c = x.shape
    h2, w2 = h // 2, w // 2
    blocks = (
        x[:, :2 * h2, :2 * w2, :]
        .reshape(n, h2, 2, w2, 2, c)
        .transpose(0, 1, 3, 5, 2, 4)
        .reshape(n, h2, w2, c, 4)
    )
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
    return out, arg


def maxpool_backward(dout, arg, x_shape):
    n, h, w, c = x_shape
    h2, w2 = h // 2, w // 2
    dblocks = np.zeros((n, h2, w2, c, 4))
    np.put_along_axis(dblocks, arg[..., None], dout[..., None], axis=-1)
    dx = np.zeros(x_shape)
    dx[:, :2 * h2, :2 * w2, :] = (
        dblocks.reshape(n, h2, w2, c, 2, 2)
        .transpose(0, 1, 4, 2, 5, 3)
        .reshape(n, 2 * h2, 2 * w2, c)
    )
    return dx


def dropout_mask(rng, shape, rate):
    """Inverted-dropout mask: kept units are scaled by 1 / (1 - rate)."""
    return (rng.random(shape) >= rate) / (1.0 - rate)


def log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)
