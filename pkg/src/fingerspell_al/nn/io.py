"""Versioned binary weight files.

Layout (little-endian): magic ``ALFW``, u32 format version, u32 length of the
UTF-8 JSON architecture, the JSON itself, i64 init seed, then every layer's
weights and biases in declaration order as float64.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Optional

import numpy as np

from .arch import ArchError, ArchSpec, ModelParams

MAGIC = b"ALFW"
FORMAT_VERSION = 1


class WeightFileError(Exception):
    pass


class CorruptWeightFileError(WeightFileError):
    pass


class WeightVersionError(WeightFileError):
    pass


class ArchMismatchError(WeightFileError):
    pass


def save_params(params: ModelParams, path) -> None:
    arch_blob = json.dumps(params.arch.to_dict(), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(arch_blob)))
        fh.write(arch_blob)
        fh.write(struct.pack("<q", params.init_seed))
        for a in params.arrays():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_params(path, expected_arch: Optional[ArchSpec] = None) -> ModelParams:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != MAGIC:
        raise CorruptWeightFileError(f"{path}: not a weight file (bad magic bytes)")
    version, arch_len = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise WeightVersionError(
            f"{path}: format version {version}, this build reads version {FORMAT_VERSION}"
        )
    pos = 12
    try:
        arch = ArchSpec.from_dict(json.loads(data[pos:pos + arch_len].decode("utf-8")))
        (init_seed,) = struct.unpack_from("<q", data, pos + arch_len)
    except (ValueError, KeyError, TypeError, struct.error, ArchError) as exc:
        raise CorruptWeightFileError(f"{path}: unreadable architecture header ({exc})") from exc
    pos += arch_len + 8

    if expected_arch is not None and arch != expected_arch:
        raise ArchMismatchError(
            f"{path}: file holds arch {arch.to_dict()} but {expected_arch.to_dict()} was expected"
        )

    shapes = arch.param_shapes()
    expected_bytes = 8 * sum(int(np.prod(ws)) + int(np.prod(bs)) for ws, bs in shapes)
    if len(data) - pos != expected_bytes:
        raise CorruptWeightFileError(
            f"{path}: expected {expected_bytes} bytes of parameters, found {len(data) - pos}"
        )
    weights, biases = [], []
    for ws, bs in shapes:
        for shape, dest in ((ws, weights), (bs, biases)):
            count = int(np.prod(shape))
            arr = np.frombuffer(data, dtype="<f8", count=count, offset=pos).astype(np.float64)
            dest.append(arr.reshape(shape))
            pos += 8 * count
    return ModelParams(arch, weights, biases, int(init_seed))
