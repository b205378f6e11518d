"""The active-learning loop, optional transfer pre-training, and gap reports."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from . import __version__
from .acquisition import random_select, score_pool, select_batch
from .config import CorpusSpec, ExperimentConfig
from .data import (
    Corpus,
    PoolState,
    SplitSpec,
    english_frequencies,
    load_csv_corpus,
    load_frequency_table,
    load_image_dir,
    make_splits,
    make_synthetic_corpus,
    resample_to_letter_frequency,
)
from .nn import (
    ModelParams,
    TrainConfig,
    TrainHistory,
    evaluate,
    init_model,
    reinit_head,
    train,
)

log = logging.getLogger(__name__)

# stream identifiers for derived seeds
_INIT, _TRAIN, _ACQUIRE, _SPLIT, _PRETRAIN = range(5)


class ExperimentError(ValueError):
    pass


def derive_seed(*parts: int) -> int:
    """Stable 63-bit seed from non-negative integer parts."""
    state = np.random.SeedSequence([int(p) for p in parts]).generate_state(2, np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])


def round_init_seed(seed: int, round_: int) -> int:
    return derive_seed(seed, round_, _INIT)


def round_train_seed(seed: int, round_: int, base: int = 0) -> int:
    return derive_seed(seed, round_, _TRAIN, base)


def load_corpus(spec: CorpusSpec, strict: bool = False) -> Corpus:
    """Ingest and (optionally) letter-frequency resample a corpus."""
    if spec.format == "csv":
        corpus = load_csv_corpus(spec.path, spec.alphabet, spec.label_letters, spec.name)
        if corpus.resolution != spec.resolution:
            raise ExperimentError(
                f"{spec.path}: CSV images are {corpus.resolution}x{corpus.resolution}, "
                f"config expects {spec.resolution}"
            )
    elif spec.format == "image_dir":
        corpus = load_image_dir(spec.path, spec.resolution, spec.alphabet, spec.name, strict=strict)
    elif spec.format == "synthetic":
        syn = spec.synthetic
        corpus = make_synthetic_corpus(
            items_per_class=syn.items_per_class,
            alphabet=spec.alphabet,
            resolution=spec.resolution,
            modes_per_class=syn.modes_per_class,
            mode_weights=syn.mode_weights,
            noise=syn.noise,
            seed=syn.seed,
            name=spec.name,
        )
    else:
        raise ExperimentError(f"unknown corpus format {spec.format!r}")

    if spec.frequency_table is not None:
        if spec.frequency_table == "english":
            table = english_frequencies()
        else:
            table = load_frequency_table(spec.frequency_table)
        size = spec.resample_size if spec.resample_size is not None else len(corpus)
        corpus = resample_to_letter_frequency(corpus, table, size, spec.resample_seed)
    return corpus


# -- records ---------------------------------------------------------------

@dataclass
class RoundRecord:
    round: int
    labeled_count: int
    test_accuracy: float
    per_class_accuracy: Dict[str, Optional[float]]
    selected: List[int] = field(default_factory=list)
    wall_clock: float = 0.0


@dataclass
class SeedRun:
    seed: int
    rounds: List[RoundRecord] = field(default_factory=list)
    truncated: bool = False
    test_corpus_index: List[int] = field(default_factory=list)
    labeled_corpus_index: List[int] = field(default_factory=list)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    corpus_name: str
    alphabet: List[str]
    runs: List[SeedRun]
    pretrain_steps: Optional[int] = None
    engine_version: str = __version__

    def run_for_seed(self, seed: int) -> SeedRun:
        for run in self.runs:
            if run.seed == seed:
                return run
        raise KeyError(seed)


# -- oracle ----------------------------------------------------------------

def oracle_label(state: PoolState, index: int, round_: int = 0) -> int:
    """Reveal the label of pool item ``index`` and move it to the labeled set.

    Each index can be acquired once; repeats and out-of-range indices raise
    :class:`~fingerspell_al.data.OracleError`.
    """
    return state._acquire(int(index), round_)


# -- training --------------------------------------------------------------

def pretrain(
    config: ExperimentConfig, corpus: Optional[Corpus] = None, history: Optional[TrainHistory] = None
) -> ModelParams:
    """Fit the model once on the full auxiliary corpus.

    The returned params are the backbone every AL round starts from; the
    auxiliary items never enter a labeled set.
    """
    spec = config.pretrain
    if spec is None:
        raise ExperimentError("config has no pretrain section")
    if corpus is None:
        corpus = load_corpus(spec.corpus)
    arch = config.arch
    if len(corpus.alphabet) != arch.class_count:
        raise ExperimentError(
            f"pretrain corpus {corpus.name!r} has {len(corpus.alphabet)} classes, "
            f"arch expects class_count={arch.class_count}"
        )
    if corpus.resolution != arch.input_resolution:
        raise ExperimentError(
            f"pretrain corpus resolution {corpus.resolution} != arch input {arch.input_resolution}"
        )
    params = init_model(arch, derive_seed(spec.train.seed, _PRETRAIN))
    return train(params, corpus.images, corpus.labels, spec.train, history)


def fit_round(
    config: ExperimentConfig,
    images: np.ndarray,
    labels: np.ndarray,
    seed: int,
    round_: int,
    pretrained: Optional[ModelParams] = None,
) -> ModelParams:
    """Fresh initialization (or pretrained backbone + new head), then train."""
    init_seed = round_init_seed(seed, round_)
    if pretrained is not None:
        params = reinit_head(pretrained, init_seed)
    else:
        params = init_model(config.arch, init_seed)
    cfg = TrainConfig(
        epochs=config.train.epochs,
        batch_size=config.train.batch_size,
        learning_rate=config.train.learning_rate,
        seed=round_train_seed(seed, round_, config.train.seed),
        beta1=config.train.beta1,
        beta2=config.train.beta2,
        eps=config.train.eps,
    )
    return train(params, images, labels, cfg)


def build_pool_state(config: ExperimentConfig, corpus: Corpus, seed: int) -> PoolState:
    spec = SplitSpec(
        test_fraction=config.split.test_fraction,
        initial_per_class=config.split.initial_per_class,
        seed=derive_seed(config.split.seed, seed, _SPLIT),
    )
    return make_splits(corpus, spec)


def acquire_indices(
    config: ExperimentConfig, params: ModelParams, state: PoolState, seed: int, round_: int, B: int
) -> List[int]:
    """Stable pool indices chosen by the configured acquisition function."""
    available = state.pool_indices()
    acq_seed = derive_seed(seed, round_, _ACQUIRE)
    if config.acquisition.function == "random":
        picks = random_select(available.size, B, acq_seed)
    else:
        scores = score_pool(config.acquisition.function, params, state.pool_features, config.acquisition.T, acq_seed)
        picks = select_batch(scores, B)
    return [int(available[p]) for p in picks]


def run_seed(
    config: ExperimentConfig,
    corpus: Corpus,
    seed: int,
    pretrained: Optional[ModelParams] = None,
    on_round: Optional[Callable[[int, ModelParams, PoolState], None]] = None,
) -> SeedRun:
    """One replica: train, evaluate, acquire, for rounds 0..R.

    ``on_round(t, params, state)`` is called after each evaluation, before
    acquisition.
    """
    state = build_pool_state(config, corpus, seed)
    rounds = config.rounds_for_pool(state.pool_size)
    run = SeedRun(seed=seed, test_corpus_index=state.test_index.tolist())
    for t in range(rounds + 1):
        start = time.perf_counter()
        params = fit_round(config, state.labeled_images, state.labeled_labels, seed, t, pretrained)
        acc, per_class = evaluate(params, state.test_images, state.test_labels)
        record = RoundRecord(
            round=t,
            labeled_count=state.labeled_count,
            test_accuracy=acc,
            per_class_accuracy={corpus.alphabet[k]: v for k, v in per_class.items()},
        )
        run.rounds.append(record)
        log.info("seed %d round %d: %d labels, accuracy %.4f", seed, t, record.labeled_count, acc)
        if on_round is not None:
            on_round(t, params, state)
        if t < rounds:
            if state.pool_size == 0:
                run.truncated = True
                record.wall_clock = time.perf_counter() - start
                break
            B = config.query_size
            if state.pool_size < B:
                run.truncated = True
                B = state.pool_size
            picked = acquire_indices(config, params, state, seed, t, B)
            for idx in picked:
                oracle_label(state, idx, t)
            record.selected = picked
        record.wall_clock = time.perf_counter() - start
    run.labeled_corpus_index = state.labeled_corpus_index().tolist()
    return run


def run_experiment(
    config: ExperimentConfig,
    corpus: Optional[Corpus] = None,
    pretrained: Optional[ModelParams] = None,
    pretrain_corpus: Optional[Corpus] = None,
) -> ExperimentResult:
    """Run every seed replica of an AL experiment.

    With a pretrain section and no ``pretrained`` params given, pre-training
    runs once here and its backbone is shared by all replicas and rounds.
    """
    if corpus is None:
        corpus = load_corpus(config.corpus)
    if len(corpus.alphabet) != config.arch.class_count:
        raise ExperimentError(
            f"corpus has {len(corpus.alphabet)} classes, arch expects {config.arch.class_count}"
        )
    pretrain_steps = None
    if config.pretrain is not None and pretrained is None:
        history = TrainHistory()
        pretrained = pretrain(config, pretrain_corpus, history)
        pretrain_steps = history.steps
    elif pretrained is not None:
        pretrain_steps = 0
    runs = [run_seed(config, corpus, s, pretrained) for s in config.seeds]
    return ExperimentResult(config, corpus.name, list(corpus.alphabet), runs, pretrain_steps)


# -- per-class gap report --------------------------------------------------

@dataclass
class GapReport:
    """Per-letter accuracy at one round for several configurations.

    ``gaps`` are differences from the first (reference) configuration.
    ``shared`` flags, per configuration with a pre-training source, which
    letters are shared between source and target.
    """

    round: int
    target: str
    alphabet: List[str]
    labels: List[str]
    accuracy: Dict[str, Dict[str, Optional[float]]]
    gaps: Dict[str, Dict[str, Optional[float]]]
    shared: Dict[str, Dict[str, bool]]
    sources: Dict[str, Optional[str]]


def _unique_labels(names: Sequence[str]) -> List[str]:
    out, seen = [], {}
    for n in names:
        seen[n] = seen.get(n, 0) + 1
        out.append(n if seen[n] == 1 else f"{n} ({seen[n]})")
    return out


def per_class_gap_report(
    results: Sequence[ExperimentResult],
    t: int,
    shared_letters: Optional[Mapping[str, Mapping[str, Iterable[str]]]] = None,
) -> GapReport:
    """Seed-averaged per-letter accuracy at round ``t`` for each result.

    ``shared_letters`` maps target corpus -> source corpus -> letters shared
    between the two.
    """
    if not results:
        raise ExperimentError("no results given")
    target = results[0].corpus_name
    alphabet = list(results[0].alphabet)
    for r in results:
        if r.corpus_name != target or list(r.alphabet) != alphabet:
            raise ExperimentError(
                f"results target different corpora: {target!r} vs {r.corpus_name!r}"
            )
        for run in r.runs:
            if len(run.rounds) <= t:
                raise ExperimentError(
                    f"result {r.config.name!r} seed {run.seed} has {len(run.rounds) - 1} rounds, "
                    f"round {t} requested"
                )
    labels = _unique_labels([r.config.name for r in results])
    accuracy: Dict[str, Dict[str, Optional[float]]] = {}
    sources: Dict[str, Optional[str]] = {}
    shared: Dict[str, Dict[str, bool]] = {}
    shared_letters = shared_letters or {}
    for label, r in zip(labels, results):
        row = {}
        for letter in alphabet:
            vals = [run.rounds[t].per_class_accuracy.get(letter) for run in r.runs]
            vals = [v for v in vals if v is not None]
            row[letter] = float(np.mean(vals)) if vals else None
        accuracy[label] = row
        source = r.config.pretrain.corpus.name if r.config.pretrain is not None else None
        sources[label] = source
        if source is not None:
            common = set(shared_letters.get(target, {}).get(source, ()))
            shared[label] = {letter: letter in common for letter in alphabet}
    ref = accuracy[labels[0]]
    gaps = {
        label: {
            letter: None if row[letter] is None or ref[letter] is None else row[letter] - ref[letter]
            for letter in alphabet
        }
        for label, row in accuracy.items()
    }
    return GapReport(t, target, alphabet, labels, accuracy, gaps, shared, sources)
