"""Binary tensor files ("BVPT"): the boundary format of the CLI.

Layout: magic "BVPT", version u16, dtype code u8 (0 = float32),
ndim u8, then ndim u32 dims, then the row-major payload. All integers
and floats little-endian.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FileFormatError, ValidationError

_MAGIC = b"BVPT"
_VERSION = 1
_DTYPE_F32 = 0

#: keep shapes honest: u32 dims, and payload must fit in memory anyway
_MAX_NDIM = 8


def serialize_tensor(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if arr.dtype != np.float32:
        raise ValidationError(f"only float32 tensors are supported, got {arr.dtype}")
    if arr.ndim > _MAX_NDIM:
        raise ValidationError(f"too many dimensions ({arr.ndim} > {_MAX_NDIM})")
    out = bytearray()
    out += _MAGIC
    out += struct.pack("<HBB", _VERSION, _DTYPE_F32, arr.ndim)
    for dim in arr.shape:
        out += struct.pack("<I", dim)
    out += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    return bytes(out)


def deserialize_tensor(data: bytes) -> np.ndarray:
    pos = 0

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise FileFormatError(f"truncated while reading {what}", offset=pos)
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    magic = take(4, "magic")
    if magic != _MAGIC:
        raise FileFormatError(f"bad magic {magic!r}, expected {_MAGIC!r}", offset=0)
    version, dtype_code, ndim = struct.unpack("<HBB", take(4, "header"))
    if version != _VERSION:
        raise FileFormatError(f"unsupported version {version}", field="version", offset=4)
    if dtype_code != _DTYPE_F32:
        raise FileFormatError(
            f"unsupported dtype code {dtype_code}", field="dtype", offset=6
        )
    if ndim > _MAX_NDIM:
        raise FileFormatError(f"ndim {ndim} too large", field="ndim", offset=7)
    shape = tuple(
        struct.unpack("<I", take(4, f"shape[{i}]"))[0] for i in range(ndim)
    )
    count = 1
    for dim in shape:
        count *= dim
    payload = take(4 * count, "payload")
    if pos != len(data):
        raise FileFormatError("trailing bytes after payload", offset=pos)
    return np.frombuffer(payload, dtype="<f4").reshape(shape).copy()


def save_tensor(path, arr: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_tensor(arr))


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return deserialize_tensor(fh.read())
