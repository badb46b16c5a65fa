"""Raw float32 grid interchange format.

Layout: 8-byte header of two little-endian uint32 (height, width) followed
by height*width little-endian float32 values in row-major order. This is the
cross-package contract for exchanging depth grids with the dataset tools, so
the byte layout is fixed.
"""

import struct

import numpy as np

_HEADER = struct.Struct("<II")


def save_raw(path, values) -> None:
    """Write a 2-d float grid; values are cast to little-endian float32."""
    arr = np.asarray(values)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError("raw grids must be 2-d and non-empty")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(h, w))
        fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_raw(path) -> np.ndarray:
    """Read a raw grid back as a (height, width) float32 array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    h, w = _HEADER.unpack_from(blob)
    expected = _HEADER.size + 4 * h * w
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, got {len(blob)}")
    return np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(h, w).copy()
