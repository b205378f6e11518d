from __future__ import annotations

import csv
import logging
import math
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

log = logging.getLogger(__name__)

FULL_ALPHABET: Tuple[str, ...] = tuple(string.ascii_uppercase)
# static letters only; J and Z are motion signs
STATIC_ALPHABET: Tuple[str, ...] = tuple(c for c in string.ascii_uppercase if c not in "JZ")
CORPUS_NAMES = ("ASL", "CSL", "GSL", "ISL", "custom")


class CorpusError(ValueError):
    pass


def check_alphabet(alphabet: Sequence[str]) -> Tuple[str, ...]:
    alphabet = tuple(alphabet)
    if len(set(alphabet)) != len(alphabet):
        dup = sorted({a for a in alphabet if alphabet.count(a) > 1})
        raise CorpusError(f"alphabet has duplicate letters: {dup}")
    moving = [a for a in alphabet if a in ("J", "Z")]
    if moving:
        raise CorpusError(f"alphabet must not contain motion letters: {moving}")
    if len(alphabet) < 2:
        raise CorpusError("alphabet needs at least two letters")
    return alphabet


@dataclass
class Corpus:
    """Labeled grayscale images, intensities in [0, 1].

    ``images`` has shape (N, resolution, resolution); ``labels`` are indices
    into ``alphabet``.
    """

    images: np.ndarray
    labels: np.ndarray
    alphabet: Tuple[str, ...]
    name: str = "custom"
    resolution: int = 28

    def __post_init__(self):
        self.alphabet = check_alphabet(self.alphabet)
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        r = self.resolution
        if self.images.ndim != 3 or self.images.shape[1:] != (r, r):
            raise CorpusError(f"images must have shape (N, {r}, {r}), got {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise CorpusError(
                f"{self.images.shape[0]} images but labels have shape {self.labels.shape}"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= len(self.alphabet)):
            raise CorpusError(f"labels must lie in [0, {len(self.alphabet)})")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=len(self.alphabet))

    def subset(self, index) -> "Corpus":
        index = np.asarray(index, dtype=np.int64)
        return Corpus(self.images[index], self.labels[index], self.alphabet, self.name, self.resolution)


def load_csv_corpus(
    path,
    alphabet: Sequence[str] = STATIC_ALPHABET,
    label_letters: Sequence[str] = FULL_ALPHABET,
    name: str = "custom",
) -> Corpus:
    """Read the sign-language-MNIST CSV layout.

    A header row, then ``label,pixel1,...,pixelR^2`` rows with pixels in
    [0, 255]. ``label`` indexes ``label_letters`` (A..Z by default, as in the
    Kaggle release) and is remapped to a position in ``alphabet``.
    """
    alphabet = check_alphabet(alphabet)
    position = {letter: i for i, letter in enumerate(alphabet)}
    images, labels = [], []
    side = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CorpusError(f"{path}: empty file")
        n_pixels = len(header) - 1
        side = math.isqrt(max(n_pixels, 0))
        if n_pixels < 1 or side * side != n_pixels:
            raise CorpusError(f"{path}: {n_pixels} pixel columns is not a perfect square")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n_pixels + 1:
                raise CorpusError(
                    f"{path}:{lineno}: ragged row with {len(row)} fields, expected {n_pixels + 1}"
                )
            try:
                raw_label = int(row[0])
            except ValueError:
                raise CorpusError(f"{path}:{lineno}: non-numeric label {row[0]!r}") from None
            if not 0 <= raw_label < len(label_letters) or label_letters[raw_label] not in position:
                raise CorpusError(f"{path}:{lineno}: label {raw_label} is outside the alphabet")
            try:
                pixels = np.array([float(v) for v in row[1:]])
            except ValueError:
                bad = next(v for v in row[1:] if not _is_number(v))
                raise CorpusError(f"{path}:{lineno}: non-numeric pixel {bad!r}") from None
            images.append(pixels.reshape(side, side) / 255.0)
            labels.append(position[label_letters[raw_label]])
    imgs = np.stack(images) if images else np.zeros((0, side, side))
    return Corpus(imgs, np.array(labels, dtype=np.int64), alphabet, name, side)


def _is_number(v: str) -> bool:
    try:
        float(v)
    except ValueError:
        return False
    return True


def luminance(rgb: np.ndarray) -> np.ndarray:
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def _area_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Row i averages the input cells overlapping output cell i (by area)."""
    edges_in = np.arange(n_in + 1) / n_in
    edges_out = np.arange(n_out + 1) / n_out
    lo = np.maximum(edges_out[:-1, None], edges_in[None, :-1])
    hi = np.minimum(edges_out[1:, None], edges_in[None, 1:])
    overlap = np.clip(hi - lo, 0.0, None)
    return overlap * n_out


def area_resize(img: np.ndarray, resolution: int) -> np.ndarray:
    """Resample a 2-D image to resolution x resolution by area averaging."""
    h, w = img.shape
    rows = _area_matrix(h, resolution)
    cols = _area_matrix(w, resolution)
    return rows @ img @ cols.T


def read_grayscale(path) -> np.ndarray:
    """Decode an image file to a 2-D float array in [0, 1]."""
    with Image.open(path) as im:
        im.load()
        if im.mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = np.asarray(im, dtype=np.float64)
            return arr / (65535.0 if arr.max() > 255 else 255.0)
        if im.mode == "L":
            return np.asarray(im, dtype=np.float64) / 255.0
        if im.mode == "F":
            return np.clip(np.asarray(im, dtype=np.float64), 0.0, 1.0)
        rgb = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return luminance(rgb)


def load_image_dir(
    path,
    resolution: int = 28,
    alphabet: Sequence[str] = STATIC_ALPHABET,
    name: str = "custom",
    strict: bool = False,
) -> Corpus:
    """Read ``<root>/<LETTER>/<file>`` images as a grayscale corpus.

    Items come out in sorted (letter, filename) order. In non-strict mode,
    unknown letter directories (e.g. J, Z, umlauts) and undecodable files are
    skipped with a warning; in strict mode they raise.
    """
    alphabet = check_alphabet(alphabet)
    root = Path(path)
    if not root.is_dir():
        raise CorpusError(f"{root}: not a directory")
    position = {letter: i for i, letter in enumerate(alphabet)}
    images, labels = [], []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        if sub.name not in position:
            if strict:
                raise CorpusError(f"{sub}: directory name {sub.name!r} is not in the alphabet")
            log.warning("skipping %s: %r not in alphabet", sub, sub.name)
            continue
        for f in sorted(p for p in sub.iterdir() if p.is_file()):
            try:
                img = read_grayscale(f)
            except (UnidentifiedImageError, OSError, ValueError) as exc:
                if strict:
                    raise CorpusError(f"{f}: cannot decode image ({exc})") from exc
                log.warning("skipping undecodable image %s: %s", f, exc)
                continue
            images.append(area_resize(img, resolution))
            labels.append(position[sub.name])
    imgs = np.stack(images) if images else np.zeros((0, resolution, resolution))
    return Corpus(imgs, np.array(labels, dtype=np.int64), alphabet, name, resolution)
