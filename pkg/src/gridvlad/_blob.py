"""Shared helpers for the fixed-layout binary model blobs (PCA1, CBK1, ...).

Every blob is magic (4 bytes) + version uint32 + format-specific uint32
header fields + packed little-endian arrays.
"""

import struct
from pathlib import Path

import numpy as np

_U32 = struct.Struct("<I")


class BlobWriter:
    def __init__(self, magic: bytes, version: int = 1):
        if len(magic) != 4:
            raise ValueError("magic must be 4 bytes")
        self._parts = [magic, _U32.pack(version)]

    def u32(self, value: int) -> "BlobWriter":
        self._parts.append(_U32.pack(value))
        return self

    def f32_array(self, arr) -> "BlobWriter":
        self._parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
        return self

    def f64_array(self, arr) -> "BlobWriter":
        self._parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return self

    def save(self, path) -> None:
        Path(path).write_bytes(b"".join(self._parts))


class BlobReader:
    def __init__(self, path, magic: bytes, version: int = 1):
        self.path = Path(path)
        self._buf = self.path.read_bytes()
        self._pos = 0
        got_magic = self._take(4)
        if got_magic != magic:
            raise ValueError(f"{self.path}: bad magic {got_magic!r}, expected {magic!r}")
        got_version = self.u32()
        if got_version != version:
            raise ValueError(f"{self.path}: unsupported version {got_version}")

    def _take(self, n: int) -> bytes:
        if self._pos + n > len(self._buf):
            raise ValueError(f"{self.path}: truncated blob")
        out = self._buf[self._pos: self._pos + n]
        self._pos += n
        return out

    def u32(self) -> int:
        return _U32.unpack(self._take(4))[0]

    def f32_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self._take(count * 4), dtype="<f4").copy()

    def f64_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self._take(count * 8), dtype="<f8").copy()

    def done(self) -> None:
        if self._pos != len(self._buf):
            raise ValueError(f"{self.path}: {len(self._buf) - self._pos} trailing bytes")
