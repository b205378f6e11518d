from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .corpus import Corpus, CorpusError


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.1
    initial_per_class: int = 2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        if self.initial_per_class < 0:
            raise ValueError(f"initial_per_class must be >= 0, got {self.initial_per_class}")


class OracleError(LookupError):
    pass


class PoolState:
    """Labeled set, unlabeled pool and test set for one AL replica.

    Pool items keep a stable *pool index* for the whole run. Their labels are
    held privately and are only released one at a time by
    :func:`fingerspell_al.engine.oracle_label`.
    """

    def __init__(self, corpus: Corpus, test_idx, labeled_idx, pool_idx):
        self.alphabet = corpus.alphabet
        self.resolution = corpus.resolution
        self.test_index = np.asarray(test_idx, dtype=np.int64)
        self.initial_index = np.asarray(labeled_idx, dtype=np.int64)
        self.pool_corpus_index = np.asarray(pool_idx, dtype=np.int64)
        self.test_images = corpus.images[self.test_index]
        self.test_labels = corpus.labels[self.test_index]
        self._labeled_images = [corpus.images[self.initial_index]]
        self._labeled_labels = [corpus.labels[self.initial_index]]
        self._pool_images = corpus.images[self.pool_corpus_index]
        self.__hidden = corpus.labels[self.pool_corpus_index].copy()
        self._available = np.ones(self.pool_corpus_index.size, dtype=bool)
        self.acquired_order: List[Tuple[int, int]] = []

    # -- labeled set ----------------------------------------------------
    @property
    def labeled_images(self) -> np.ndarray:
        if len(self._labeled_images) > 1:
            self._labeled_images = [np.concatenate(self._labeled_images)]
        return self._labeled_images[0]

    @property
    def labeled_labels(self) -> np.ndarray:
        if len(self._labeled_labels) > 1:
            self._labeled_labels = [np.concatenate(self._labeled_labels)]
        return self._labeled_labels[0]

    @property
    def labeled_count(self) -> int:
        return int(self.labeled_labels.size)

    def labeled_corpus_index(self) -> np.ndarray:
        acquired = np.array([i for _, i in self.acquired_order], dtype=np.int64)
        return np.concatenate([self.initial_index, self.pool_corpus_index[acquired]])

    # -- pool -----------------------------------------------------------
    @property
    def pool_size(self) -> int:
        return int(self._available.sum())

    def pool_indices(self) -> np.ndarray:
        """Stable indices of items still unlabeled, ascending."""
        return np.flatnonzero(self._available)

    @property
    def pool_features(self) -> np.ndarray:
        return self._pool_images[self._available]

    def _acquire(self, index: int, round_: int) -> int:
        if not 0 <= index < self._available.size:
            raise OracleError(f"pool index {index} out of range [0, {self._available.size})")
        if not self._available[index]:
            raise OracleError(f"pool index {index} was already acquired")
        label = int(self.__hidden[index])
        self._available[index] = False
        self._labeled_images.append(self._pool_images[index][None])
        self._labeled_labels.append(np.array([label], dtype=np.int64))
        self.acquired_order.append((round_, int(index)))
        return label


def make_splits(corpus: Corpus, spec: SplitSpec) -> PoolState:
    """Stratified test hold-out, then ``initial_per_class`` labels per class.

    Per class, ``floor(test_fraction * n)`` items go to test (at least one),
    then ``initial_per_class`` are drawn uniformly
    from the rest; everything else is the pool.
    """
    rng = np.random.default_rng(spec.seed)
    counts = corpus.class_counts()
    test, labeled, pool = [], [], []
    for k, letter in enumerate(corpus.alphabet):
        members = np.flatnonzero(corpus.labels == k)
        n = members.size
        n_test = max(1, math.floor(spec.test_fraction * n + 1e-9)) if n else 0
        if n - n_test < spec.initial_per_class:
            raise CorpusError(
                f"class {letter!r} has {counts[k]} items: {n_test} go to test, leaving fewer than "
                f"initial_per_class={spec.initial_per_class}"
            )
        shuffled = rng.permutation(members)
        test.append(shuffled[:n_test])
        rest = shuffled[n_test:]
        take = rng.choice(rest.size, size=spec.initial_per_class, replace=False)
        keep = np.ones(rest.size, dtype=bool)
        keep[take] = False
        labeled.append(np.sort(rest[take]))
        pool.append(rest[keep])
    test_idx = np.sort(np.concatenate(test))
    labeled_idx = np.concatenate(labeled)
    pool_idx = np.sort(np.concatenate(pool))
    return PoolState(corpus, test_idx, labeled_idx, pool_idx)
