"""``EASW`` weights files.

Little-endian layout: magic ``EASW``, version u32, tensor count u32, then per
tensor a u16-length-prefixed UTF-8 name, dtype code u8 (0=f32, 1=f64), rank u8,
one u32 per dimension and the raw data.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .network import NetworkParams

MAGIC = b"EASW"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def dump_tensors(tensors: list[tuple[str, np.ndarray]]) -> bytes:
    out = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors:
        arr = np.asarray(arr)
        if arr.dtype not in _CODES:
            raise TypeError(f"{name}: unsupported dtype {arr.dtype}")
        code = _CODES[arr.dtype]
        raw = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw)) + raw)
        out.append(struct.pack("<BB", code, arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())
    return b"".join(out)


def load_tensors(data: bytes) -> list[tuple[str, np.ndarray]]:
    if data[:4] != MAGIC:
        raise ValueError("not an EASW weights file")
    pos = 4

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise ValueError("truncated weights file")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    version, count = struct.unpack("<II", take(8))
    if version != VERSION:
        raise ValueError(f"unsupported weights version {version}")
    tensors = []
    for _ in range(count):
        (length,) = struct.unpack("<H", take(2))
        name = take(length).decode("utf-8")
        code, rank = struct.unpack("<BB", take(2))
        if code not in _DTYPES:
            raise ValueError(f"{name}: unknown dtype code {code}")
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        dtype = _DTYPES[code]
        count_items = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(take(count_items * dtype.itemsize), dtype=dtype).reshape(shape)
        tensors.append((name, arr.astype(dtype.newbyteorder("="))))
    if pos != len(data):
        raise ValueError("trailing bytes after last tensor")
    return tensors


def save_params(path, params: NetworkParams) -> None:
    Path(path).write_bytes(dump_tensors(params.named_tensors()))


def load_params(path, n_layers: int) -> NetworkParams:
    return NetworkParams.from_named(load_tensors(Path(path).read_bytes()), n_layers)
