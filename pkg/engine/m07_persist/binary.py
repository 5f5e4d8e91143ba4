"""Little-endian binary containers for weights (CVTW) and single tensors (CVTF).

CVTW: magic ``CVTW``, u32 version, u32 tensor count, then per tensor a u16
name length, the UTF-8 name, u8 rank, u32 extents and the float32 payload.
CVTF: magic ``CVTF``, u32 version, u8 rank, u32 extents, payload. Version 1
carries float32; version 2 adds a u8 dtype code before the rank so integer
instance maps can be stored. Both end with the CRC32 of every preceding byte.
"""

from __future__ import annotations

import struct
import zlib
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from engine.lib.contracts import TILE_MAGIC, WEIGHTS_MAGIC
from engine.lib.errors import BadMagic, ChecksumMismatch, IoError, VersionUnsupported
from engine.m07_persist.json_store import write_bytes_atomic

WEIGHTS_VERSION = 1
TILE_VERSION_F32 = 1
TILE_VERSION_TYPED = 2

_DTYPES: dict[int, np.dtype] = {0: np.dtype("<f4"), 1: np.dtype("<i4")}
_DTYPE_CODES = {dt: code for code, dt in _DTYPES.items()}


class _Reader:
    def __init__(self, body: bytes, offset: int) -> None:
        self._body = body
        self._pos = offset

    def take(self, fmt: str) -> tuple[int, ...]:
        size = struct.calcsize(fmt)
        if self._pos + size > len(self._body):
            raise ChecksumMismatch("container ends inside a header field")
        values = struct.unpack_from(fmt, self._body, self._pos)
        self._pos += size
        return values

    def array(self, shape: tuple[int, ...], dtype: np.dtype) -> np.ndarray:
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        size = count * dtype.itemsize
        if self._pos + size > len(self._body):
            raise ChecksumMismatch("container ends inside a tensor payload")
        arr = np.frombuffer(self._body, dtype=dtype, count=count, offset=self._pos)
        self._pos += size
        return arr.reshape(shape).astype(dtype.newbyteorder("="))

    @property
    def exhausted(self) -> bool:
        return self._pos == len(self._body)


def _verified_body(data: bytes, magic: bytes) -> bytes:
    if len(data) < len(magic) or data[: len(magic)] != magic:
        raise BadMagic(f"expected magic {magic!r}")
    if len(data) < len(magic) + 8:
        raise ChecksumMismatch("container is truncated")
    body, trailer = data[:-4], data[-4:]
    (stored,) = struct.unpack("<I", trailer)
    if zlib.crc32(body) & 0xFFFFFFFF != stored:
        raise ChecksumMismatch("CRC32 does not match payload")
    return body


def _shape_header(shape: tuple[int, ...]) -> bytes:
    return struct.pack("<B", len(shape)) + struct.pack(f"<{len(shape)}I", *shape)


def _seal(body: bytes) -> bytes:
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def encode_weights(tensors: Mapping[str, np.ndarray]) -> bytes:
    parts = [WEIGHTS_MAGIC, struct.pack("<II", WEIGHTS_VERSION, len(tensors))]
    for name, tensor in tensors.items():
        raw = name.encode("utf-8")
        arr = np.ascontiguousarray(tensor, dtype="<f4")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(_shape_header(arr.shape))
        parts.append(arr.tobytes())
    return _seal(b"".join(parts))


def decode_weights(data: bytes) -> dict[str, np.ndarray]:
    body = _verified_body(data, WEIGHTS_MAGIC)
    reader = _Reader(body, len(WEIGHTS_MAGIC))
    version, count = reader.take("<II")
    if version != WEIGHTS_VERSION:
        raise VersionUnsupported(f"weights version {version} is not supported")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.take("<H")
        name = bytes(reader.take(f"<{name_len}s")[0]).decode("utf-8")
        (rank,) = reader.take("<B")
        shape = reader.take(f"<{rank}I")
        tensors[name] = reader.array(tuple(shape), _DTYPES[0])
    if not reader.exhausted:
        raise ChecksumMismatch("trailing bytes after the last tensor")
    return tensors


def encode_tensor(tensor: np.ndarray) -> bytes:
    arr = np.asarray(tensor)
    if np.issubdtype(arr.dtype, np.integer):
        typed = np.ascontiguousarray(arr, dtype="<i4")
        header = struct.pack("<IB", TILE_VERSION_TYPED, _DTYPE_CODES[typed.dtype])
    else:
        typed = np.ascontiguousarray(arr, dtype="<f4")
        header = struct.pack("<I", TILE_VERSION_F32)
    return _seal(TILE_MAGIC + header + _shape_header(typed.shape) + typed.tobytes())


def decode_tensor(data: bytes) -> np.ndarray:
    body = _verified_body(data, TILE_MAGIC)
    reader = _Reader(body, len(TILE_MAGIC))
    (version,) = reader.take("<I")
    if version == TILE_VERSION_F32:
        dtype = _DTYPES[0]
    elif version == TILE_VERSION_TYPED:
        (code,) = reader.take("<B")
        if code not in _DTYPES:
            raise VersionUnsupported(f"tensor dtype code {code} is not supported")
        dtype = _DTYPES[code]
    else:
        raise VersionUnsupported(f"tensor version {version} is not supported")
    (rank,) = reader.take("<B")
    shape = reader.take(f"<{rank}I")
    arr = reader.array(tuple(shape), dtype)
    if not reader.exhausted:
        raise ChecksumMismatch("trailing bytes after the payload")
    return arr


def _read_bytes(path: str | Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def save_weights(path: str | Path, tensors: Mapping[str, np.ndarray]) -> Path:
    return write_bytes_atomic(path, encode_weights(tensors))


def load_weights(path: str | Path) -> dict[str, np.ndarray]:
    return decode_weights(_read_bytes(path))


def save_tensor(path: str | Path, tensor: np.ndarray) -> Path:
    return write_bytes_atomic(path, encode_tensor(tensor))


def load_tensor(path: str | Path) -> np.ndarray:
    return decode_tensor(_read_bytes(path))


__all__ = [
    "decode_tensor",
    "decode_weights",
    "encode_tensor",
    "encode_weights",
    "load_tensor",
    "load_weights",
    "save_tensor",
    "save_weights",
]
