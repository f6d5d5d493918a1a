"""PCA reduction of raw descriptors to the working dimension.

Covariance uses the unbiased 1/(n-1) estimator; no whitening. Basis signs
follow one fixed convention (largest-magnitude entry positive) so fits are
reproducible across runs and platforms.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._blob import BlobReader, BlobWriter
from .grids import DescriptorGrid

PCA_MAGIC = b"PCA1"


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray          # (input_dim,)
    basis: np.ndarray         # (input_dim, output_dim), orthonormal columns
    explained_variance: Optional[np.ndarray] = None  # not persisted

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        basis = np.asarray(self.basis, dtype=np.float64)
        if mean.ndim != 1 or basis.ndim != 2 or basis.shape[0] != mean.shape[0]:
            raise ValueError(
                f"inconsistent PCA shapes: mean {mean.shape}, basis {basis.shape}"
            )
        if basis.shape[1] > basis.shape[0]:
            raise ValueError(
                f"output_dim {basis.shape[1]} exceeds input_dim {basis.shape[0]}"
            )
        gram = basis.T @ basis
        if not np.allclose(gram, np.eye(basis.shape[1]), atol=1e-6):
            raise ValueError("basis columns are not orthonormal within 1e-6")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "basis", basis)

    @property
    def input_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def output_dim(self) -> int:
        return self.basis.shape[1]


def _fix_signs(basis: np.ndarray) -> np.ndarray:
    flip = basis[np.abs(basis).argmax(axis=0), np.arange(basis.shape[1])] < 0
    out = basis.copy()
    out[:, flip] *= -1.0
    return out


def fit_pca(descriptors, output_dim: int) -> PcaModel:
    """Fit a PCA basis on (n, input_dim) descriptors via SVD of the centered data."""
    x = np.asarray(descriptors, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"descriptors must be 2-D, got shape {x.shape}")
    n, input_dim = x.shape
    if n < 2:
        raise ValueError(f"need at least 2 descriptors to fit PCA, got {n}")
    if output_dim < 1:
        raise ValueError(f"output_dim must be positive, got {output_dim}")
    if output_dim > input_dim:
        raise ValueError(f"output_dim {output_dim} exceeds input_dim {input_dim}")
    if output_dim > n:
        raise ValueError(f"output_dim {output_dim} exceeds sample count {n}")

    mean = x.mean(axis=0)
    centered = x - mean
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    if singular[0] == 0.0:
        raise ValueError("zero variance: all descriptors are identical")
    basis = _fix_signs(vt[:output_dim].T)
    variance = (singular[:output_dim] ** 2) / (n - 1)
    return PcaModel(mean=mean, basis=basis, explained_variance=variance)


def project(model: PcaModel, descriptors) -> np.ndarray:
    """Map (n, input_dim) descriptors to (n, output_dim)."""
    x = np.asarray(descriptors, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise ValueError(
            f"dimension mismatch: descriptors {x.shape[-1]}, model {model.input_dim}"
        )
    return (x - model.mean) @ model.basis


def apply_pca(model: PcaModel, grid: DescriptorGrid) -> DescriptorGrid:
    """Project every descriptor of a grid; T and a are unchanged."""
    if grid.dim != model.input_dim:
        raise ValueError(
            f"dimension mismatch: grid D={grid.dim}, model input_dim={model.input_dim}"
        )
    flat = project(model, grid.descriptors())
    t, a = grid.frames, grid.grid_size
    return DescriptorGrid(flat.reshape(t, a, a, model.output_dim))


def save_pca(model: PcaModel, path) -> None:
    (
        BlobWriter(PCA_MAGIC)
        .u32(model.input_dim)
        .u32(model.output_dim)
        .f32_array(model.mean)
        .f32_array(model.basis)
        .save(path)
    )


def load_pca(path) -> PcaModel:
    r = BlobReader(path, PCA_MAGIC)
    input_dim = r.u32()
    output_dim = r.u32()
    mean = r.f32_array(input_dim).astype(np.float64)
    basis = r.f32_array(input_dim * output_dim).astype(np.float64)
    r.done()
    return PcaModel(mean=mean, basis=basis.reshape(input_dim, output_dim))
