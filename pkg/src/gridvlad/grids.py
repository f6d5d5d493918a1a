"""Per-video descriptor tensors and the DGT1 binary file format.

A descriptor grid holds one descriptor of dimension D for every (frame,
cell-row, cell-col) position of a video whose frames were divided into an
a x a grid. On disk:

    bytes 0..3   magic "DGT1"
    bytes 4..19  version, T, a, D as little-endian uint32
    then         T * a^2 * D little-endian float32, [t][i][j][k] row-major

Header dimensions are authoritative: any disagreement with the payload
length is a hard error, never a silent truncation.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DGT_MAGIC = b"DGT1"
DGT_VERSION = 1
_HEADER = struct.Struct("<4sIIII")


@dataclass(frozen=True, eq=False)
class DescriptorGrid:
    """Immutable (T, a, a, D) float32 tensor of frame descriptors."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 4:
            raise ValueError(f"descriptor grid must be 4-D, got shape {arr.shape}")
        t, a1, a2, d = arr.shape
        if a1 != a2:
            raise ValueError(f"grid must be square, got {a1}x{a2}")
        if t < 1 or a1 < 1 or d < 1:
            raise ValueError(f"all grid dimensions must be positive, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("descriptor grid contains non-finite values")
        object.__setattr__(self, "data", arr)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def grid_size(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[3]

    def descriptors(self) -> np.ndarray:
        """All descriptors as a (T * a^2, D) view."""
        return self.data.reshape(-1, self.dim)


def write_dgt(grid: DescriptorGrid, path) -> None:
    path = Path(path)
    header = _HEADER.pack(
        DGT_MAGIC, DGT_VERSION, grid.frames, grid.grid_size, grid.dim
    )
    payload = grid.data.astype("<f4", copy=False).tobytes()
    path.write_bytes(header + payload)


def read_dgt(path) -> DescriptorGrid:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, t, a, d = _HEADER.unpack_from(raw)
    if magic != DGT_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {DGT_MAGIC!r}")
    if version != DGT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    if t < 1 or a < 1 or d < 1:
        raise ValueError(f"{path}: non-positive dimensions T={t} a={a} D={d}")
    expected = t * a * a * d * 4
    got = len(raw) - _HEADER.size
    if got != expected:
        raise ValueError(
            f"{path}: payload mismatch, header implies {expected} bytes, found {got}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(t, a, a, d)
    if not np.isfinite(data).all():
        raise ValueError(f"{path}: payload contains non-finite values")
    return DescriptorGrid(data)
