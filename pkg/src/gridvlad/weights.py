"""Between-class scatter in weight space and its top eigenvectors: the engine
behind both the spatial and the temporal weight matrices.

Given per-sample feature stacks V_i (F x m) with class labels, the scatter

    sigma_b = (1/N) * sum_c n_c * (M_c - M)^T (M_c - M)

uses the per-class and global means of the stacked matrices, so that
w^T sigma_b w equals the trace of the between-class covariance of the
projected features x_i = V_i w for any weight vector w. Weights are the
eigenvectors of the largest eigenvalues of sigma_b.

The eigensolver is a cyclic Jacobi sweep; m is tiny (a^2 or the pyramid
segment count), so an exact dense solver with no dependencies suffices.
"""

from dataclasses import dataclass

import numpy as np

from ._blob import BlobReader, BlobWriter

WGT_MAGIC = b"WGT1"

_JACOBI_TOL = 1e-12
_MAX_SWEEPS = 60


@dataclass(frozen=True, eq=False)
class StackedViews:
    """Per-sample (F, m) matrices with 1-based class labels."""

    views: tuple          # of (F, m) float64 arrays
    labels: np.ndarray    # (N,) int
    classes: int

    def __post_init__(self):
        views = tuple(np.asarray(v, dtype=np.float64) for v in self.views)
        labels = np.asarray(self.labels, dtype=np.int64)
        if len(views) == 0:
            raise ValueError("need at least one sample")
        if labels.shape != (len(views),):
            raise ValueError(
                f"label count {labels.shape} does not match sample count {len(views)}"
            )
        shape = views[0].shape
        if len(shape) != 2:
            raise ValueError(f"views must be 2-D matrices, got shape {shape}")
        for n, v in enumerate(views):
            if v.shape != shape:
                raise ValueError(
                    f"view {n} has shape {v.shape}, expected {shape}"
                )
        if labels.min() < 1 or labels.max() > self.classes:
            raise ValueError(f"labels must lie in 1..{self.classes}")
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "labels", labels)

    @property
    def weight_size(self) -> int:
        return self.views[0].shape[1]


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Orthonormal eigenvector columns with their (descending) eigenvalues."""

    columns: np.ndarray      # (m, n_components) float64
    eigenvalues: np.ndarray  # (n_components,) float64

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=np.float64)
        vals = np.asarray(self.eigenvalues, dtype=np.float64)
        if cols.ndim != 2 or vals.shape != (cols.shape[1],):
            raise ValueError(
                f"inconsistent shapes: columns {cols.shape}, eigenvalues {vals.shape}"
            )
        if cols.shape[1] > cols.shape[0]:
            raise ValueError(
                f"n_components {cols.shape[1]} exceeds weight size {cols.shape[0]}"
            )
        if not (np.isfinite(cols).all() and np.isfinite(vals).all()):
            raise ValueError("weight matrix contains non-finite values")
        if np.any(np.diff(vals) > 0.0):
            raise ValueError("eigenvalues must be in descending order")
        tol = 1e-9 * max(1.0, float(np.abs(vals).max(initial=0.0)))
        if vals.size and vals[-1] < -tol:
            raise ValueError(f"eigenvalue {vals[-1]} is negative beyond tolerance")
        gram = cols.T @ cols
        if not np.allclose(gram, np.eye(cols.shape[1]), atol=1e-6):
            raise ValueError("weight columns are not orthonormal within 1e-6")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "eigenvalues", vals)

    @property
    def weight_size(self) -> int:
        return self.columns.shape[0]

    @property
    def n_components(self) -> int:
        return self.columns.shape[1]


def between_class_scatter(views: StackedViews) -> np.ndarray:
    """Symmetric PSD (m, m) scatter of the per-class view means."""
    labels = views.labels
    present = np.unique(labels)
    if present.size < 2:
        raise ValueError("need >= 2 classes with samples to build the scatter")

    n_total = len(views.views)
    shape = views.views[0].shape
    overall = np.zeros(shape)
    class_sums = {c: np.zeros(shape) for c in present}
    class_counts = {c: 0 for c in present}
    for v, y in zip(views.views, labels):
        overall += v
        class_sums[int(y)] += v
        class_counts[int(y)] += 1
    overall /= n_total

    m = shape[1]
    sigma = np.zeros((m, m))
    for c in present:
        diff = class_sums[int(c)] / class_counts[int(c)] - overall
        sigma += class_counts[int(c)] * (diff.T @ diff)
    sigma /= n_total
    return (sigma + sigma.T) / 2.0


def _jacobi_eigh(matrix: np.ndarray) -> tuple:
    """Cyclic Jacobi rotations; returns (eigenvalues, eigenvectors as columns)
    in original index order. Converges to off-diagonal Frobenius norm below
    1e-12 relative to the matrix scale."""
    a = matrix.copy()
    m = a.shape[0]
    v = np.eye(m)
    scale = max(1.0, float(np.linalg.norm(a)))
    for _ in range(_MAX_SWEEPS):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0)
        if off < _JACOBI_TOL * scale:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = 0.5 * np.arctan2(2.0 * apq, a[q, q] - a[p, p])
                c, s = np.cos(theta), np.sin(theta)
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
    return np.diag(a).copy(), v


def top_eigenvectors(sigma: np.ndarray, n_components: int) -> WeightMatrix:
    """Eigenvectors of the n_components largest eigenvalues of a symmetric
    matrix, unit norm, deterministic sign, ties kept in index order."""
    s = np.asarray(sigma, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"matrix must be square, got shape {s.shape}")
    m = s.shape[0]
    if not np.allclose(s, s.T, atol=1e-8):
        raise ValueError("matrix is not symmetric within 1e-8")
    if not 1 <= n_components <= m:
        raise ValueError(f"n_components {n_components} outside 1..{m}")

    vals, vecs = _jacobi_eigh(s)
    order = np.argsort(-vals, kind="stable")[:n_components]
    vals = vals[order]
    vecs = vecs[:, order]
    vecs /= np.linalg.norm(vecs, axis=0)
    lead = np.abs(vecs).argmax(axis=0)
    flip = vecs[lead, np.arange(vecs.shape[1])] < 0.0
    vecs[:, flip] *= -1.0
    return WeightMatrix(columns=vecs, eigenvalues=vals)


def learn_weights(views: StackedViews, n_components: int) -> WeightMatrix:
    """between_class_scatter followed by top_eigenvectors."""
    return top_eigenvectors(between_class_scatter(views), n_components)


def spatial_heatmap(weights: WeightMatrix, grid_size: int, component: int = 0) -> np.ndarray:
    """|w| of one eigenvector reshaped to the a x a cell grid."""
    if weights.weight_size != grid_size**2:
        raise ValueError(
            f"weight size {weights.weight_size} is not {grid_size}^2"
        )
    if not 0 <= component < weights.n_components:
        raise ValueError(f"component {component} outside 0..{weights.n_components - 1}")
    return np.abs(weights.columns[:, component]).reshape(grid_size, grid_size)


def save_weights(weights: WeightMatrix, path) -> None:
    (
        BlobWriter(WGT_MAGIC)
        .u32(weights.weight_size)
        .u32(weights.n_components)
        .f32_array(weights.eigenvalues)
        .f32_array(weights.columns)
        .save(path)
    )


def load_weights(path) -> WeightMatrix:
    r = BlobReader(path, WGT_MAGIC)
    m = r.u32()
    n = r.u32()
    vals = r.f32_array(n).astype(np.float64)
    cols = r.f32_array(m * n).astype(np.float64).reshape(m, n)
    r.done()
    # f32 quantization perturbs unit norms; restore them exactly.
    cols /= np.linalg.norm(cols, axis=0)
    return WeightMatrix(columns=cols, eigenvalues=vals)
