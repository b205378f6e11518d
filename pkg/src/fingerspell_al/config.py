"""Experiment configuration: dataclasses plus strict YAML parsing.

Unknown keys are errors, every default is materialized in the resolved
config, and ``to_dict``/``config_from_dict`` round-trip exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml

from .acquisition import FUNCTIONS
from .data import CORPUS_NAMES, FULL_ALPHABET, STATIC_ALPHABET, SplitSpec
from .data.corpus import CorpusError, check_alphabet
from .nn import ArchError, ArchSpec, TrainConfig

CORPUS_FORMATS = ("csv", "image_dir", "synthetic")

# query sizes used for the four fingerspelling corpora
DEFAULT_QUERY_SIZE = {"ISL": 50, "GSL": 50, "ASL": 10, "CSL": 5}
# CSL is small, so it holds out more
DEFAULT_TEST_FRACTION = {"CSL": 0.3}


class ConfigError(ValueError):
    def __init__(self, key_path: str, message: str):
        self.key_path = key_path
        super().__init__(f"{key_path}: {message}" if key_path else message)


@dataclass(frozen=True)
class SyntheticSpec:
    items_per_class: int = 50
    modes_per_class: int = 3
    noise: float = 0.15
    seed: int = 0
    mode_weights: Optional[Tuple[float, ...]] = None  # None: geometric 1, 1/2, 1/4, ...


@dataclass(frozen=True)
class CorpusSpec:
    name: str = "custom"
    format: str = "synthetic"
    path: Optional[str] = None
    alphabet: Tuple[str, ...] = STATIC_ALPHABET
    label_letters: Tuple[str, ...] = FULL_ALPHABET
    resolution: int = 28
    frequency_table: Optional[str] = None  # None, "english", or a file path
    resample_size: Optional[int] = None
    resample_seed: int = 0
    synthetic: Optional[SyntheticSpec] = None


@dataclass(frozen=True)
class AcquisitionSpec:
    function: str = "variation_ratio"
    T: int = 20


@dataclass(frozen=True)
class PretrainSpec:
    corpus: CorpusSpec
    train: TrainConfig = TrainConfig()
    weights: Optional[str] = None  # load instead of training when set


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    corpus: CorpusSpec
    seeds: Tuple[int, ...]
    split: SplitSpec = SplitSpec()
    train: TrainConfig = TrainConfig()
    acquisition: AcquisitionSpec = AcquisitionSpec()
    query_size: int = 10
    rounds: Optional[int] = None
    label_budget: float = 0.15
    pretrain: Optional[PretrainSpec] = None
    arch: ArchSpec = ArchSpec()

    def rounds_for_pool(self, pool_size: int) -> int:
        """Explicit ``rounds``, else enough rounds to label ``label_budget`` of the pool."""
        if self.rounds is not None:
            return self.rounds
        return math.ceil(self.label_budget * pool_size / self.query_size - 1e-9)

    def config_hash(self) -> str:
        blob = json.dumps(to_dict(self), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


# -- serialization --------------------------------------------------------

def _corpus_dict(c: CorpusSpec) -> Dict[str, Any]:
    return {
        "name": c.name,
        "format": c.format,
        "path": c.path,
        "alphabet": list(c.alphabet),
        "label_letters": list(c.label_letters),
        "resolution": c.resolution,
        "frequency_table": c.frequency_table,
        "resample_size": c.resample_size,
        "resample_seed": c.resample_seed,
        "synthetic": None if c.synthetic is None else _synthetic_dict(c.synthetic),
    }


def _synthetic_dict(s: SyntheticSpec) -> Dict[str, Any]:
    d = vars(s).copy()
    d["mode_weights"] = None if s.mode_weights is None else list(s.mode_weights)
    return d


def _train_dict(t: TrainConfig) -> Dict[str, Any]:
    return {
        "epochs": t.epochs,
        "batch_size": t.batch_size,
        "learning_rate": t.learning_rate,
        "seed": t.seed,
        "beta1": t.beta1,
        "beta2": t.beta2,
        "eps": t.eps,
    }


def to_dict(cfg: ExperimentConfig) -> Dict[str, Any]:
    """Fully resolved, JSON/YAML-safe view of a config."""
    return {
        "name": cfg.name,
        "corpus": _corpus_dict(cfg.corpus),
        "seeds": list(cfg.seeds),
        "split": {
            "test_fraction": cfg.split.test_fraction,
            "initial_per_class": cfg.split.initial_per_class,
            "seed": cfg.split.seed,
        },
        "train": _train_dict(cfg.train),
        "acquisition": {"function": cfg.acquisition.function, "T": cfg.acquisition.T},
        "query_size": cfg.query_size,
        "rounds": cfg.rounds,
        "label_budget": cfg.label_budget,
        "pretrain": None
        if cfg.pretrain is None
        else {
            "corpus": _corpus_dict(cfg.pretrain.corpus),
            "train": _train_dict(cfg.pretrain.train),
            "weights": cfg.pretrain.weights,
        },
        "arch": cfg.arch.to_dict(),
    }


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


# -- parsing --------------------------------------------------------------

_MISSING = object()


class _Section:
    """Reads typed keys out of one mapping and rejects leftovers."""

    def __init__(self, data: Any, path: str):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(path, f"expected a mapping, got {type(data).__name__}")
        self.data = dict(data)
        self.path = path
        self.seen = set()

    def _key(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def raw(self, key: str, default: Any = _MISSING) -> Any:
        self.seen.add(key)
        if key not in self.data:
            if default is _MISSING:
                raise ConfigError(self._key(key), "missing required key")
            return default
        return self.data[key]

    def get(self, key: str, kind, default: Any = _MISSING, optional: bool = False) -> Any:
        value = self.raw(key, default)
        if value is None and optional:
            return None
        return _coerce(value, kind, self._key(key))

    def sub(self, key: str, optional: bool = False) -> Optional["_Section"]:
        value = self.raw(key, None)
        if value is None and optional:
            return None
        return _Section(value, self._key(key))

    def finish(self) -> None:
        unknown = sorted(set(self.data) - self.seen)
        if unknown:
            raise ConfigError(self._key(unknown[0]), "unknown key")


def _coerce(value: Any, kind, key: str) -> Any:
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, str):
            # YAML 1.1 reads "1e-3" (no dot) as a string
            try:
                return float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    if kind == "letters":
        if isinstance(value, str):
            value = list(value)
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(key, f"expected a list of letters, got {value!r}")
        return tuple(value)
    raise TypeError(kind)


def _wrap(key: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except (ValueError, ArchError, CorpusError, TypeError) as exc:
        raise ConfigError(key, str(exc)) from exc


def _parse_corpus(sec: _Section) -> CorpusSpec:
    name = sec.get("name", str, "custom")
    if name not in CORPUS_NAMES:
        raise ConfigError(sec._key("name"), f"expected one of {CORPUS_NAMES}, got {name!r}")
    fmt = sec.get("format", str)
    if fmt not in CORPUS_FORMATS:
        raise ConfigError(sec._key("format"), f"expected one of {CORPUS_FORMATS}, got {fmt!r}")
    path = sec.get("path", str, None, optional=True)
    if fmt != "synthetic" and path is None:
        raise ConfigError(sec._key("path"), f"required for format {fmt!r}")
    alphabet = sec.get("alphabet", "letters", list(STATIC_ALPHABET))
    _wrap(sec._key("alphabet"), check_alphabet, alphabet)
    label_letters = sec.get("label_letters", "letters", list(FULL_ALPHABET))
    resolution = sec.get("resolution", int, 28)
    if resolution < 1:
        raise ConfigError(sec._key("resolution"), "must be >= 1")
    table = sec.get("frequency_table", str, None, optional=True)
    resample_size = sec.get("resample_size", int, None, optional=True)
    if resample_size is not None and resample_size < 1:
        raise ConfigError(sec._key("resample_size"), "must be >= 1")
    resample_seed = sec.get("resample_seed", int, 0)
    syn_sec = sec.sub("synthetic", optional=True)
    synthetic = None
    if fmt == "synthetic":
        syn_sec = syn_sec or _Section({}, sec._key("synthetic"))
        weights = syn_sec.raw("mode_weights", None)
        if weights is not None:
            key = syn_sec._key("mode_weights")
            if not isinstance(weights, list) or not weights:
                raise ConfigError(key, "expected a non-empty list of numbers")
            weights = tuple(_coerce(w, float, key) for w in weights)
            if any(w < 0 for w in weights) or sum(weights) <= 0:
                raise ConfigError(key, "weights must be non-negative with a positive sum")
        synthetic = SyntheticSpec(
            items_per_class=syn_sec.get("items_per_class", int, 50),
            modes_per_class=syn_sec.get("modes_per_class", int, 3 if weights is None else len(weights)),
            noise=syn_sec.get("noise", float, 0.15),
            seed=syn_sec.get("seed", int, 0),
            mode_weights=weights,
        )
        if weights is not None and len(weights) != synthetic.modes_per_class:
            raise ConfigError(
                syn_sec._key("modes_per_class"),
                f"{synthetic.modes_per_class} does not match {len(weights)} mode_weights",
            )
        if synthetic.items_per_class < 1 or synthetic.modes_per_class < 1:
            raise ConfigError(syn_sec.path, "items_per_class and modes_per_class must be >= 1")
        syn_sec.finish()
    elif syn_sec is not None:
        raise ConfigError(sec._key("synthetic"), "only valid with format 'synthetic'")
    sec.finish()
    return CorpusSpec(
        name, fmt, path, alphabet, label_letters, resolution, table, resample_size, resample_seed, synthetic
    )


def _parse_train(sec: _Section) -> TrainConfig:
    d = TrainConfig()
    out = _wrap(
        sec.path,
        TrainConfig,
        epochs=sec.get("epochs", int, d.epochs),
        batch_size=sec.get("batch_size", int, d.batch_size),
        learning_rate=sec.get("learning_rate", float, d.learning_rate),
        seed=sec.get("seed", int, d.seed),
        beta1=sec.get("beta1", float, d.beta1),
        beta2=sec.get("beta2", float, d.beta2),
        eps=sec.get("eps", float, d.eps),
    )
    sec.finish()
    return out


def _parse_arch(sec: _Section, class_count_default: int) -> ArchSpec:
    d = ArchSpec()
    conv = sec.raw("conv_blocks", [list(b) for b in d.conv_blocks])
    fc = sec.raw("fc_layers", [list(f) for f in d.fc_layers])
    for key, rows, width in (("conv_blocks", conv, 3), ("fc_layers", fc, 2)):
        if not isinstance(rows, list) or not all(isinstance(r, list) and len(r) == width for r in rows):
            raise ConfigError(sec._key(key), f"expected a list of {width}-element lists")
    try:
        conv = [(_coerce(f, int, ""), _coerce(k, int, ""), _coerce(r, float, "")) for f, k, r in conv]
        fc = [(_coerce(w, int, ""), _coerce(r, float, "")) for w, r in fc]
    except ConfigError as exc:
        raise ConfigError(sec._key("conv_blocks/fc_layers"), str(exc).lstrip(": ")) from None
    arch = _wrap(
        sec.path,
        ArchSpec,
        input_resolution=sec.get("input_resolution", int, d.input_resolution),
        input_channels=sec.get("input_channels", int, d.input_channels),
        conv_blocks=tuple(conv),
        fc_layers=tuple(fc),
        class_count=sec.get("class_count", int, class_count_default),
    )
    sec.finish()
    return arch


def config_from_dict(data: Any) -> ExperimentConfig:
    top = _Section(data, "")
    name = top.get("name", str, "experiment")
    corpus = _parse_corpus(top.sub("corpus"))
    seeds = top.raw("seeds")
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("seeds", "expected a non-empty list of integers")
    seeds = tuple(_coerce(s, int, f"seeds[{i}]") for i, s in enumerate(seeds))
    if any(s < 0 for s in seeds):
        raise ConfigError("seeds", "seeds must be non-negative")

    split_sec = top.sub("split")
    split = _wrap(
        "split",
        SplitSpec,
        test_fraction=split_sec.get("test_fraction", float, DEFAULT_TEST_FRACTION.get(corpus.name, 0.1)),
        initial_per_class=split_sec.get("initial_per_class", int, 2),
        seed=split_sec.get("seed", int, 0),
    )
    split_sec.finish()
    train = _parse_train(top.sub("train"))

    acq_sec = top.sub("acquisition")
    acquisition = AcquisitionSpec(
        function=acq_sec.get("function", str, "variation_ratio"),
        T=acq_sec.get("T", int, 20),
    )
    if acquisition.function not in FUNCTIONS:
        raise ConfigError("acquisition.function", f"expected one of {FUNCTIONS}, got {acquisition.function!r}")
    if acquisition.T < 1:
        raise ConfigError("acquisition.T", "must be >= 1")
    acq_sec.finish()

    query_size = top.get("query_size", int, DEFAULT_QUERY_SIZE.get(corpus.name, 10))
    if query_size < 1:
        raise ConfigError("query_size", "must be >= 1")
    rounds = top.get("rounds", int, None, optional=True)
    if rounds is not None and rounds < 0:
        raise ConfigError("rounds", "must be >= 0")
    label_budget = top.get("label_budget", float, 0.15)
    if not 0.0 < label_budget <= 1.0:
        raise ConfigError("label_budget", "must be in (0, 1]")

    pre_sec = top.sub("pretrain", optional=True)
    pretrain = None
    if pre_sec is not None:
        pretrain = PretrainSpec(
            corpus=_parse_corpus(pre_sec.sub("corpus")),
            train=_parse_train(pre_sec.sub("train")),
            weights=pre_sec.get("weights", str, None, optional=True),
        )
        pre_sec.finish()

    arch = _parse_arch(top.sub("arch"), len(corpus.alphabet))
    if arch.class_count != len(corpus.alphabet):
        raise ConfigError(
            "arch.class_count",
            f"{arch.class_count} does not match the corpus alphabet size {len(corpus.alphabet)}",
        )
    if arch.input_resolution != corpus.resolution:
        raise ConfigError(
            "arch.input_resolution",
            f"{arch.input_resolution} does not match corpus.resolution {corpus.resolution}",
        )
    top.finish()
    return ExperimentConfig(
        name, corpus, seeds, split, train, acquisition, query_size, rounds, label_budget, pretrain, arch
    )


def parse_config(path) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"{path}: malformed YAML ({exc})") from exc
    return config_from_dict(data)


def with_seeds(cfg: ExperimentConfig, seeds) -> ExperimentConfig:
    return replace(cfg, seeds=tuple(int(s) for s in seeds))
