from .corpus import (
    CORPUS_NAMES,
    FULL_ALPHABET,
    STATIC_ALPHABET,
    Corpus,
    CorpusError,
    area_resize,
    load_csv_corpus,
    load_image_dir,
    luminance,
    read_grayscale,
)
from .frequency import (
    FrequencyTable,
    english_frequencies,
    largest_remainder,
    load_frequency_table,
    parse_frequency_table,
    resample_to_letter_frequency,
)
from .splits import OracleError, PoolState, SplitSpec, make_splits
from .synthetic import make_synthetic_corpus

__all__ = [
    "CORPUS_NAMES",
    "FULL_ALPHABET",
    "STATIC_ALPHABET",
    "Corpus",
    "CorpusError",
    "FrequencyTable",
    "OracleError",
    "PoolState",
    "SplitSpec",
    "area_resize",
    "english_frequencies",
    "largest_remainder",
    "load_csv_corpus",
    "load_frequency_table",
    "load_image_dir",
    "luminance",
    "make_splits",
    "make_synthetic_corpus",
    "parse_frequency_table",
    "read_grayscale",
    "resample_to_letter_frequency",
]
