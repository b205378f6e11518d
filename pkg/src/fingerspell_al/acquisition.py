"""Uncertainty scores over the unlabeled pool and batch selection.

All scores are in nats. ``variation_ratio`` and ``max_entropy`` take the
per-item class probabilities averaged over MC-dropout passes (or one
deterministic pass); ``bald`` and ``mean_std`` need the individual passes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np

from .nn import ModelParams, forward

FUNCTIONS = ("variation_ratio", "max_entropy", "bald", "mean_std", "random")


@dataclass
class PredictiveSamples:
    probs: np.ndarray  # (T, M, K)
    pass_seeds: List[int] = field(default_factory=list)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 3 or self.probs.shape[0] < 1:
            raise ValueError(f"probs must be a (T>=1, M, K) array, got shape {self.probs.shape}")

    @property
    def mean_probs(self) -> np.ndarray:
        return self.probs.mean(axis=0)


@dataclass
class ScoreVector:
    scores: np.ndarray
    function_name: str

    def __len__(self):
        return len(self.scores)


def predictive_samples(params: ModelParams, pool_features, T: int, seed: int) -> PredictiveSamples:
    """T stochastic forward passes; pass t uses dropout seed ``seed ^ t``."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if len(pool_features) == 0:
        raise ValueError("cannot score an empty pool")
    seeds = [int(seed) ^ t for t in range(T)]
    probs = np.stack([forward(params, pool_features, s) for s in seeds])
    return PredictiveSamples(probs, seeds)


def _entropy(p: np.ndarray) -> np.ndarray:
    # 0 log 0 := 0
    logp = np.log(np.where(p > 0, p, 1.0))
    return -(p * logp).sum(axis=-1)


def variation_ratio(mean_probs) -> ScoreVector:
    p = np.asarray(mean_probs, dtype=np.float64)
    return ScoreVector(1.0 - p.max(axis=1), "variation_ratio")


def max_entropy(mean_probs) -> ScoreVector:
    return ScoreVector(_entropy(np.asarray(mean_probs, dtype=np.float64)), "max_entropy")


def bald(samples: PredictiveSamples) -> ScoreVector:
    """Entropy of the mean minus mean entropy; round-off negatives clamp to 0."""
    p = samples.probs
    score = _entropy(p.mean(axis=0)) - _entropy(p).mean(axis=0)
    return ScoreVector(np.maximum(score, 0.0), "bald")


def mean_std(samples: PredictiveSamples) -> ScoreVector:
    """Class-averaged population standard deviation across passes."""
    return ScoreVector(samples.probs.std(axis=0).mean(axis=1), "mean_std")


def select_batch(scores: ScoreVector, B: int) -> List[int]:
    """Positions of the B largest scores (ties to lower index), ascending."""
    s = np.asarray(scores.scores if isinstance(scores, ScoreVector) else scores, dtype=np.float64)
    if B < 0 or B > s.size:
        raise ValueError(f"cannot select {B} items from a pool of {s.size}")
    order = np.lexsort((np.arange(s.size), -s))
    return sorted(int(i) for i in order[:B])


def random_select(M: int, B: int, seed: int) -> List[int]:
    if B < 0 or B > M:
        raise ValueError(f"cannot select {B} items from a pool of {M}")
    rng = np.random.default_rng(seed)
    return sorted(int(i) for i in rng.choice(M, size=B, replace=False))


def score_pool(name: str, params: ModelParams, pool_features, T: int, seed: int) -> ScoreVector:
    """Run the named uncertainty function over the pool."""
    if name not in _SCORERS:
        raise ValueError(f"unknown acquisition function {name!r}; expected one of {FUNCTIONS[:-1]}")
    if T == 1 and name in ("variation_ratio", "max_entropy"):
        # single deterministic pass
        mean = forward(params, pool_features)
        return _SCORERS[name](mean)
    samples = predictive_samples(params, pool_features, T, seed)
    if name in ("variation_ratio", "max_entropy"):
        return _SCORERS[name](samples.mean_probs)
    return _SCORERS[name](samples)


_SCORERS: Dict[str, Callable] = {
    "variation_ratio": variation_ratio,
    "max_entropy": max_entropy,
    "bald": bald,
    "mean_std": mean_std,
}
