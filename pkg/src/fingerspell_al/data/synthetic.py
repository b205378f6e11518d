from __future__ import annotations

from typing import Sequence

import numpy as np

from .corpus import STATIC_ALPHABET, Corpus


def _blob_pattern(rng: np.random.Generator, resolution: int, n_blobs: int) -> np.ndarray:
    grid = (np.arange(resolution) + 0.5) / resolution
    yy, xx = np.meshgrid(grid, grid, indexing="ij")
    img = np.zeros((resolution, resolution))
    for _ in range(n_blobs):
        cy, cx = rng.uniform(0.15, 0.85, size=2)
        sigma = rng.uniform(0.06, 0.16)
        img += rng.uniform(0.5, 1.0) * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma**2))
    return img / img.max()


def make_synthetic_corpus(
    items_per_class: int = 50,
    alphabet: Sequence[str] = STATIC_ALPHABET,
    resolution: int = 28,
    modes_per_class: int = 3,
    mode_weights: Sequence[float] = None,
    noise: float = 0.15,
    seed: int = 0,
    name: str = "custom",
) -> Corpus:
    """Cluster-structured stand-in for a fingerspelling corpus.

    Each class owns a blob pattern; each of its modes blends that pattern with
    a mode-specific one, so a class is a union of clusters of unequal size
    (``mode_weights``, default geometric 1, 1/2, 1/4, ...). Items are a mode
    prototype plus Gaussian pixel noise, clipped to [0, 1].
    """
    rng = np.random.default_rng(seed)
    if mode_weights is None:
        mode_weights = [0.5**m for m in range(modes_per_class)]
    w = np.asarray(mode_weights, dtype=np.float64)
    w = w / w.sum()
    images, labels = [], []
    for k in range(len(alphabet)):
        base = _blob_pattern(rng, resolution, 3)
        protos = [0.55 * base + 0.45 * _blob_pattern(rng, resolution, 2) for _ in range(len(w))]
        modes = rng.choice(len(w), size=items_per_class, p=w)
        for m in modes:
            img = protos[m] + rng.normal(0.0, noise, size=(resolution, resolution))
            images.append(np.clip(img, 0.0, 1.0))
            labels.append(k)
    return Corpus(np.stack(images), np.array(labels), tuple(alphabet), name, resolution)
