from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np


class ArchError(ValueError):
    """Raised for an architecture that cannot produce a valid network."""


@dataclass(frozen=True)
class ArchSpec:
    """Layer layout of the classifier.

    Every conv block is ``conv (same padding) -> ReLU -> 2x2 max-pool ->
    dropout``. Every entry of ``fc_layers`` is a hidden ``dense -> ReLU ->
    dropout`` layer; the classification head (``class_count`` outputs) is
    appended after them and carries no dropout.
    """

    input_resolution: int = 28
    input_channels: int = 1
    conv_blocks: Tuple[Tuple[int, int, float], ...] = ((32, 3, 0.25), (64, 3, 0.25))
    fc_layers: Tuple[Tuple[int, float], ...] = ((128, 0.5),)
    class_count: int = 24

    def __post_init__(self):
        # accept lists (e.g. from a config file) but store tuples so the arch hashes
        object.__setattr__(self, "conv_blocks", tuple(tuple(b) for b in self.conv_blocks))
        object.__setattr__(self, "fc_layers", tuple(tuple(f) for f in self.fc_layers))
        self.validate()

    def validate(self) -> None:
        if self.input_resolution < 1:
            raise ArchError(f"input_resolution must be >= 1, got {self.input_resolution}")
        if self.input_channels < 1:
            raise ArchError(f"input_channels must be >= 1, got {self.input_channels}")
        if self.class_count < 2:
            raise ArchError(f"class_count must be >= 2, got {self.class_count}")
        side = self.input_resolution
        for i, block in enumerate(self.conv_blocks):
            if len(block) != 3:
                raise ArchError(f"conv_blocks[{i}] must be (filters, kernel, dropout), got {block!r}")
            filters, kernel, rate = block
            if filters < 1:
                raise ArchError(f"conv_blocks[{i}]: filter count must be >= 1, got {filters}")
            if kernel < 1 or kernel % 2 == 0:
                raise ArchError(f"conv_blocks[{i}]: kernel size must be odd and >= 1, got {kernel}")
            if not 0.0 <= rate < 1.0:
                raise ArchError(f"conv_blocks[{i}]: dropout rate must be in [0, 1), got {rate}")
            side //= 2
            if side < 1:
                raise ArchError(
                    f"conv_blocks[{i}]: pooling reduces a {self.input_resolution}x"
                    f"{self.input_resolution} input below 1x1"
                )
        for i, layer in enumerate(self.fc_layers):
            if len(layer) != 2:
                raise ArchError(f"fc_layers[{i}] must be (width, dropout), got {layer!r}")
            width, rate = layer
            if width < 1:
                raise ArchError(f"fc_layers[{i}]: width must be >= 1, got {width}")
            if not 0.0 <= rate < 1.0:
                raise ArchError(f"fc_layers[{i}]: dropout rate must be in [0, 1), got {rate}")

    @property
    def feature_side(self) -> int:
        side = self.input_resolution
        for _ in self.conv_blocks:
            side //= 2
        return side

    @property
    def flat_features(self) -> int:
        channels = self.conv_blocks[-1][0] if self.conv_blocks else self.input_channels
        return self.feature_side ** 2 * channels

    def param_shapes(self) -> List[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
        """(weight shape, bias shape) per layer in declaration order."""
        shapes = []
        cin = self.input_channels
        for filters, kernel, _ in self.conv_blocks:
            shapes.append(((kernel, kernel, cin, filters), (filters,)))
            cin = filters
        fan_in = self.flat_features
        for width, _ in self.fc_layers:
            shapes.append(((fan_in, width), (width,)))
            fan_in = width
        shapes.append(((fan_in, self.class_count), (self.class_count,)))
        return shapes

    def to_dict(self) -> dict:
        return {
            "input_resolution": self.input_resolution,
            "input_channels": self.input_channels,
            "conv_blocks": [list(b) for b in self.conv_blocks],
            "fc_layers": [list(f) for f in self.fc_layers],
            "class_count": self.class_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArchSpec":
        return cls(
            input_resolution=int(d["input_resolution"]),
            input_channels=int(d["input_channels"]),
            conv_blocks=tuple((int(f), int(k), float(r)) for f, k, r in d["conv_blocks"]),
            fc_layers=tuple((int(w), float(r)) for w, r in d["fc_layers"]),
            class_count=int(d["class_count"]),
        )


@dataclass
class ModelParams:
    arch: ArchSpec
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    init_seed: int = 0

    def __post_init__(self):
        shapes = self.arch.param_shapes()
        if len(self.weights) != len(shapes) or len(self.biases) != len(shapes):
            raise ArchError(
                f"expected {len(shapes)} layers for this arch, got "
                f"{len(self.weights)} weight and {len(self.biases)} bias arrays"
            )
        for i, ((ws, bs), w, b) in enumerate(zip(shapes, self.weights, self.biases)):
            if w.shape != ws or b.shape != bs:
                raise ArchError(
                    f"layer {i}: expected weight {ws} / bias {bs}, got {w.shape} / {b.shape}"
                )

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def arrays(self) -> List[np.ndarray]:
        """Weights and biases interleaved in declaration order."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.arch,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.init_seed,
        )

    def equals(self, other: "ModelParams") -> bool:
        """Bitwise equality of architecture and every array."""
        if self.arch != other.arch:
            return False
        return all(
            a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(self.arrays(), other.arrays())
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 128
    learning_rate: float = 1e-3
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
