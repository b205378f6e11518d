from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from typing import Dict, Mapping, Sequence

import numpy as np

from .corpus import Corpus, CorpusError


@dataclass(frozen=True)
class FrequencyTable:
    """Target class probabilities keyed by letter."""

    probs: Mapping[str, float]

    def __post_init__(self):
        probs = {str(k): float(v) for k, v in self.probs.items()}
        neg = [k for k, v in probs.items() if not v >= 0]
        if neg:
            raise CorpusError(f"negative or NaN probability for letters {neg}")
        total = sum(probs.values())
        if abs(total - 1.0) > 1e-9:
            raise CorpusError(f"frequency table sums to {total!r}, expected 1 within 1e-9")
        object.__setattr__(self, "probs", probs)

    def check_covers(self, alphabet: Sequence[str]) -> None:
        missing = [a for a in alphabet if a not in self.probs]
        if missing:
            raise CorpusError(f"frequency table has no entry for letters {missing}")
        extra = sorted(set(self.probs) - set(alphabet))
        if extra and any(self.probs[e] > 0 for e in extra):
            raise CorpusError(f"frequency table gives mass to letters outside the alphabet: {extra}")

    @classmethod
    def normalized(cls, weights: Mapping[str, float]) -> "FrequencyTable":
        total = float(sum(weights.values()))
        return cls({k: v / total for k, v in weights.items()})


def parse_frequency_table(text: str, source: str = "<string>") -> FrequencyTable:
    """``LETTER,probability`` per line; ``#`` starts a comment."""
    probs: Dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2 or not parts[0]:
            raise CorpusError(f"{source}:{lineno}: expected LETTER,probability, got {raw!r}")
        letter, value = parts
        if letter in probs:
            raise CorpusError(f"{source}:{lineno}: duplicate letter {letter!r}")
        try:
            probs[letter] = float(value)
        except ValueError:
            raise CorpusError(f"{source}:{lineno}: bad probability {value!r}") from None
    return FrequencyTable(probs)


def load_frequency_table(path) -> FrequencyTable:
    with open(path, encoding="utf-8") as fh:
        return parse_frequency_table(fh.read(), str(path))


def english_frequencies() -> FrequencyTable:
    """English letter frequencies over the 24 static letters."""
    text = resources.files(__package__).joinpath("english_letters.csv").read_text(encoding="utf-8")
    return parse_frequency_table(text, "english_letters.csv")


def largest_remainder(table: FrequencyTable, letters: Sequence[str], total: int) -> Dict[str, int]:
    """Hamilton apportionment of ``total`` seats by ``table``.

    Quotas are computed exactly from the float probabilities; leftover seats go
    to the largest fractional remainders, ties to the alphabetically first
    letter.
    """
    if total < 0:
        raise ValueError(f"total must be >= 0, got {total}")
    quotas = {a: Fraction(table.probs[a]) * total for a in letters}
    mass = sum(Fraction(table.probs[a]) for a in letters)
    if mass != 1:
        # renormalize exactly so seats always add up to total
        quotas = {a: q / mass for a, q in quotas.items()}
    seats = {a: int(q) for a, q in quotas.items()}
    leftover = total - sum(seats.values())
    order = sorted(letters, key=lambda a: (-(quotas[a] - seats[a]), a))
    for a in order[:leftover]:
        seats[a] += 1
    return seats


def resample_to_letter_frequency(
    corpus: Corpus, table: FrequencyTable, target_size: int, seed: int
) -> Corpus:
    """Resample so class counts follow ``table`` exactly (largest remainder).

    A class is drawn with replacement only when it needs more items than it
    has. Output is grouped by class in alphabet order.
    """
    table.check_covers(corpus.alphabet)
    counts = corpus.class_counts()
    for k, letter in enumerate(corpus.alphabet):
        if table.probs[letter] > 0 and counts[k] == 0:
            raise CorpusError(
                f"letter {letter!r} has target probability {table.probs[letter]} but no source items"
            )
    seats = largest_remainder(table, corpus.alphabet, target_size)
    rng = np.random.default_rng(seed)
    picks = []
    for k, letter in enumerate(corpus.alphabet):
        need = seats[letter]
        if need == 0:
            continue
        members = np.flatnonzero(corpus.labels == k)
        replace = need > members.size
        picks.append(rng.choice(members, size=need, replace=replace))
    index = np.concatenate(picks) if picks else np.zeros(0, dtype=np.int64)
    return corpus.subset(index)
