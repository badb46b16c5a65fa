"""Raw float32 grid exchange format.

Layout: 8-byte header of two little-endian uint32 (height, width), then
height * width float32 values, little-endian, row-major. No compression,
no alignment padding. Used to hand depth grids across process boundaries
without any image-codec quantization.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

_HEADER = struct.Struct("<II")


def save_raw(path, values: np.ndarray) -> None:
    """Write a 2-d float grid; values are cast to float32."""
    values = np.asarray(values)
    if values.ndim != 2 or values.size == 0:
        raise ValueError("raw grids must be non-empty 2-d arrays")
    h, w = values.shape
    data = np.ascontiguousarray(values, dtype="<f4")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(h, w))
        f.write(data.tobytes())


def load_raw(path) -> np.ndarray:
    """Read a grid written by save_raw; returns (h, w) float32."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    h, w = _HEADER.unpack_from(blob)
    expected = _HEADER.size + 4 * h * w
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(blob)}")
    values = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
    return values.reshape(h, w).copy()
