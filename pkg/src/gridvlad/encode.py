"""VLAD encoding of descriptor grids: whole-video, per-cell, and
per-cell-per-temporal-segment, plus the temporal pyramid bookkeeping.

Normalization order is intra (per-center block L2) -> power (signed square
root) -> global L2; zero vectors stay zero throughout, so empty temporal
segments are representable.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from ._blob import BlobReader, BlobWriter
from .codebook import Codebook
from .grids import DescriptorGrid

VRP_MAGIC = b"VRP1"

METHODS = ("lcd", "star", "dsar", "dstar")


@dataclass(frozen=True)
class PyramidConfig:
    """Temporal pyramid with levels 0..L; level l splits the video into 2^l
    segments, so there are d = 2^(L+1) - 1 segments overall."""

    levels: int

    def __post_init__(self):
        if self.levels < 0:
            raise ValueError(f"levels must be >= 0, got {self.levels}")

    @property
    def segment_count(self) -> int:
        return 2 ** (self.levels + 1) - 1

    def segments(self) -> list:
        """All (level, segment) pairs, level-major: (0,0), (1,0), (1,1), ..."""
        return [(l, s) for l in range(self.levels + 1) for s in range(2**l)]

    def index(self, level: int, segment: int) -> int:
        """Position of (level, segment) in the level-major ordering."""
        if not 0 <= level <= self.levels:
            raise ValueError(f"level {level} outside 0..{self.levels}")
        if not 0 <= segment < 2**level:
            raise ValueError(f"segment {segment} outside 0..{2**level - 1}")
        return 2**level - 1 + segment


@dataclass(frozen=True, eq=False)
class CellVlad:
    """One VLAD vector for one (cell, temporal segment) pair."""

    vector: np.ndarray
    cell: tuple  # (i, j), 0-based
    level: int = 0
    segment: int = 0


@dataclass(frozen=True)
class RepParams:
    k: int
    d: int
    a: int
    n_sp: Optional[int] = None
    n_tmp: Optional[int] = None
    levels: Optional[int] = None


@dataclass(frozen=True, eq=False)
class VideoRepresentation:
    vector: np.ndarray
    method: str
    params: RepParams

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        v = np.ascontiguousarray(self.vector, dtype=np.float64)
        norm = float(np.linalg.norm(v))
        if norm != 0.0 and abs(norm - 1.0) > 1e-9:
            raise ValueError(f"representation norm {norm} is neither 0 nor 1")
        p = self.params
        expected = {
            "lcd": p.k * p.d,
            "dsar": p.k * p.d * (p.n_sp or 0),
            "dstar": p.k * p.d * (p.n_sp or 0) * (p.n_tmp or 0),
            "star": p.k * p.d * p.a**2 * (2 ** ((p.levels or 0) + 1) - 1),
        }[self.method]
        if v.shape != (expected,):
            raise ValueError(
                f"{self.method} representation must have length {expected}, got {v.shape}"
            )
        object.__setattr__(self, "vector", v)


def segment_bounds(frames: int, level: int) -> list:
    """Split 0..frames into 2^level contiguous half-open ranges.

    Balanced: the first (frames mod 2^level) segments get the extra frame.
    Trailing segments are empty when frames < 2^level.
    """
    if frames < 1:
        raise ValueError(f"frame count must be positive, got {frames}")
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    parts = 2**level
    base, extra = divmod(frames, parts)
    bounds = []
    start = 0
    for s in range(parts):
        size = base + (1 if s < extra else 0)
        bounds.append((start, start + size))
        start += size
    return bounds


def _grid_assignments(grid: DescriptorGrid, codebook: Codebook) -> np.ndarray:
    if grid.dim != codebook.dim:
        raise ValueError(
            f"dimension mismatch: grid D={grid.dim}, codebook D={codebook.dim}"
        )
    idx, _ = kernels.nearest_centers(
        np.ascontiguousarray(grid.descriptors(), dtype=np.float64), codebook.centers
    )
    return idx.reshape(grid.frames, grid.grid_size, grid.grid_size)


def _residual_vector(descs: np.ndarray, codebook: Codebook, idx: np.ndarray) -> np.ndarray:
    raw = kernels.residual_sums(
        np.ascontiguousarray(descs, dtype=np.float64),
        codebook.centers,
        np.ascontiguousarray(idx, dtype=np.int64),
    )
    return raw.reshape(-1)


def encode_cell_segment(
    grid: DescriptorGrid,
    codebook: Codebook,
    cell: tuple,
    frame_range: tuple,
    level: int = 0,
    segment: int = 0,
) -> CellVlad:
    """Unnormalized VLAD over one cell restricted to [start, stop) frames.

    An empty frame range yields the zero vector.
    """
    i, j = cell
    a = grid.grid_size
    if not (0 <= i < a and 0 <= j < a):
        raise ValueError(f"cell {cell} outside 0..{a - 1}")
    start, stop = frame_range
    if not (0 <= start <= stop <= grid.frames):
        raise ValueError(f"frame range {frame_range} invalid for T={grid.frames}")
    if grid.dim != codebook.dim:
        raise ValueError(
            f"dimension mismatch: grid D={grid.dim}, codebook D={codebook.dim}"
        )
    descs = np.ascontiguousarray(grid.data[start:stop, i, j, :], dtype=np.float64)
    if descs.shape[0] == 0:
        vec = np.zeros(codebook.k * codebook.dim)
    else:
        idx, _ = kernels.nearest_centers(descs, codebook.centers)
        vec = _residual_vector(descs, codebook, idx)
    return CellVlad(vector=vec, cell=(i, j), level=level, segment=segment)


def normalize_vlad(vector: np.ndarray, k: int) -> np.ndarray:
    """Intra-normalize the K per-center blocks, apply the signed square root,
    then L2-normalize globally. Zero blocks and zero vectors stay zero."""
    v = np.asarray(vector, dtype=np.float64)
    if v.ndim != 1 or v.size % k != 0:
        raise ValueError(f"vector of length {v.size} is not divisible into {k} blocks")
    blocks = v.reshape(k, -1).copy()
    norms = np.linalg.norm(blocks, axis=1)
    nonzero = norms > 0.0
    blocks[nonzero] /= norms[nonzero, None]
    flat = blocks.reshape(-1)
    flat = np.sign(flat) * np.sqrt(np.abs(flat))
    total = np.linalg.norm(flat)
    if total > 0.0:
        flat /= total
    return flat


def power_l2(vector: np.ndarray) -> np.ndarray:
    """Signed square root followed by global L2 normalization (zero stays zero)."""
    v = np.asarray(vector, dtype=np.float64)
    out = np.sign(v) * np.sqrt(np.abs(v))
    norm = np.linalg.norm(out)
    if norm > 0.0:
        out /= norm
    return out


def encode_lcd(grid: DescriptorGrid, codebook: Codebook) -> VideoRepresentation:
    """Single normalized VLAD over all T * a^2 descriptors of the video."""
    if grid.dim != codebook.dim:
        raise ValueError(
            f"dimension mismatch: grid D={grid.dim}, codebook D={codebook.dim}"
        )
    descs = np.ascontiguousarray(grid.descriptors(), dtype=np.float64)
    idx, _ = kernels.nearest_centers(descs, codebook.centers)
    vec = normalize_vlad(_residual_vector(descs, codebook, idx), codebook.k)
    return VideoRepresentation(
        vector=vec,
        method="lcd",
        params=RepParams(k=codebook.k, d=codebook.dim, a=grid.grid_size),
    )


def encode_cells(grid: DescriptorGrid, codebook: Codebook) -> dict:
    """Normalized per-cell VLADs over the whole video: {(i, j): CellVlad}."""
    pyramid = encode_pyramid(grid, codebook, PyramidConfig(levels=0))
    return {(i, j): cv for (i, j, _, _), cv in pyramid.items()}


def encode_pyramid(
    grid: DescriptorGrid, codebook: Codebook, config: PyramidConfig
) -> dict:
    """Normalized VLAD for every (cell, level, segment): exactly a^2 * d entries
    keyed (i, j, level, segment)."""
    assignments = _grid_assignments(grid, codebook)
    a = grid.grid_size
    bounds_per_level = [segment_bounds(grid.frames, l) for l in range(config.levels + 1)]
    out = {}
    for i in range(a):
        for j in range(a):
            cell_descs = np.ascontiguousarray(grid.data[:, i, j, :], dtype=np.float64)
            cell_idx = np.ascontiguousarray(assignments[:, i, j])
            for level, seg in config.segments():
                start, stop = bounds_per_level[level][seg]
                if stop > start:
                    raw = _residual_vector(
                        cell_descs[start:stop], codebook, cell_idx[start:stop]
                    )
                else:
                    raw = np.zeros(codebook.k * codebook.dim)
                out[(i, j, level, seg)] = CellVlad(
                    vector=normalize_vlad(raw, codebook.k),
                    cell=(i, j),
                    level=level,
                    segment=seg,
                )
    return out


def save_representation(rep: VideoRepresentation, path) -> None:
    p = rep.params
    (
        BlobWriter(VRP_MAGIC)
        .u32(METHODS.index(rep.method))
        .u32(p.k)
        .u32(p.d)
        .u32(p.a)
        .u32(p.n_sp or 0)
        .u32(p.n_tmp or 0)
        .u32(p.levels if p.levels is not None else 0)
        .u32(1 if p.levels is not None else 0)
        .u32(rep.vector.size)
        .f32_array(rep.vector)
        .save(path)
    )


def load_representation(path) -> VideoRepresentation:
    r = BlobReader(path, VRP_MAGIC)
    method = METHODS[r.u32()]
    k, d, a, n_sp, n_tmp, levels, has_levels, size = (r.u32() for _ in range(8))
    vec = r.f32_array(size).astype(np.float64)
    r.done()
    # Re-normalize: f32 quantization perturbs the stored unit norm.
    norm = np.linalg.norm(vec)
    if norm > 0.0:
        vec /= norm
    params = RepParams(
        k=k,
        d=d,
        a=a,
        n_sp=n_sp or None,
        n_tmp=n_tmp or None,
        levels=levels if has_levels else None,
    )
    return VideoRepresentation(vector=vec, method=method, params=params)
