"""K-means codebook for VLAD: k-means++ seeding, Lloyd iterations to an
assignment fixpoint, deterministic given the seed.

Distances are squared Euclidean; assignment ties go to the smallest center
index. Empty clusters are reseeded to the point farthest from its assigned
center.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from ._blob import BlobReader, BlobWriter

CBK_MAGIC = b"CBK1"


@dataclass(frozen=True, eq=False)
class Codebook:
    centers: np.ndarray  # (K, D) float64

    def __post_init__(self):
        c = np.ascontiguousarray(self.centers, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise ValueError(f"centers must be a non-empty 2-D matrix, got {c.shape}")
        if not np.isfinite(c).all():
            raise ValueError("centers contain non-finite values")
        if np.unique(c, axis=0).shape[0] != c.shape[0]:
            raise ValueError("codebook contains identical centers")
        object.__setattr__(self, "centers", c)

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


def assign(codebook: Codebook, x) -> int:
    """Index (0-based) of the nearest center; ties -> smallest index."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (codebook.dim,):
        raise ValueError(f"dimension mismatch: vector {x.shape}, centers D={codebook.dim}")
    idx, _ = kernels.nearest_centers(
        np.ascontiguousarray(x[None, :]), codebook.centers
    )
    return int(idx[0])


def assign_many(codebook: Codebook, x) -> np.ndarray:
    """Nearest-center indices for (n, D) descriptors."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != codebook.dim:
        raise ValueError(f"dimension mismatch: descriptors {x.shape}, centers D={codebook.dim}")
    idx, _ = kernels.nearest_centers(x, codebook.centers)
    return idx


def _plusplus_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    centers[0] = x[rng.integers(n)]
    d2 = np.einsum("nd,nd->n", x - centers[0], x - centers[0])
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            raise ValueError(
                f"insufficient distinct points: fewer than {k} distinct descriptors"
            )
        centers[j] = x[rng.choice(n, p=d2 / total)]
        cand = np.einsum("nd,nd->n", x - centers[j], x - centers[j])
        np.minimum(d2, cand, out=d2)
    return centers


def fit_kmeans(
    descriptors,
    k: int,
    seed: int,
    max_iters: int = 100,
    objective_log: list | None = None,
) -> Codebook:
    """Lloyd's algorithm with k-means++ seeding.

    Stops at an assignment fixpoint or after max_iters. If objective_log is
    given, the quantization error after each assignment step is appended to
    it (non-increasing by construction).
    """
    x = np.ascontiguousarray(descriptors, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"descriptors must be 2-D, got shape {x.shape}")
    n = x.shape[0]
    if k < 1:
        raise ValueError(f"K must be positive, got {k}")
    if n < k:
        raise ValueError(f"need at least K={k} descriptors, got {n}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be positive, got {max_iters}")

    rng = np.random.default_rng(seed)
    centers = _plusplus_init(x, k, rng)
    prev_idx = None
    for _ in range(max_iters):
        idx, d2 = kernels.nearest_centers(x, centers)
        if objective_log is not None:
            objective_log.append(float(d2.sum()))
        if prev_idx is not None and np.array_equal(idx, prev_idx):
            break
        prev_idx = idx

        counts = np.bincount(idx, minlength=k).astype(np.float64)
        sums = np.zeros_like(centers)
        np.add.at(sums, idx, x)
        nonempty = counts > 0
        centers[nonempty] = sums[nonempty] / counts[nonempty, None]

        empty = np.flatnonzero(~nonempty)
        if empty.size:
            # Reseed each empty cluster to the currently worst-fit point,
            # skipping candidates that would duplicate an existing center.
            dist = d2.copy()
            for c in empty:
                while True:
                    far = int(np.argmax(dist))
                    if dist[far] == -np.inf:
                        raise ValueError(
                            "insufficient distinct points to reseed empty clusters"
                        )
                    dist[far] = -np.inf
                    if not (centers == x[far]).all(axis=1).any():
                        centers[c] = x[far]
                        break
    return Codebook(centers=centers)


def save_codebook(codebook: Codebook, path) -> None:
    (
        BlobWriter(CBK_MAGIC)
        .u32(codebook.k)
        .u32(codebook.dim)
        .f32_array(codebook.centers)
        .save(path)
    )


def load_codebook(path) -> Codebook:
    r = BlobReader(path, CBK_MAGIC)
    k = r.u32()
    d = r.u32()
    centers = r.f32_array(k * d).astype(np.float64).reshape(k, d)
    r.done()
    return Codebook(centers=centers)
