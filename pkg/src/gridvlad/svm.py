"""One-vs-all linear SVM trained by dual coordinate descent, plus score-level
late fusion.

Each binary problem minimizes 0.5 ||w||^2 + C * sum hinge(y_i w.x_i) over the
training set, solved in the dual with per-epoch shuffling from the given
seed. The bias is handled by augmenting features with a constant 1 (so it is
regularized like any other coordinate). Training stops when the relative
duality gap falls below 1e-4 or after max_epochs.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from ._blob import BlobReader, BlobWriter

SVM_MAGIC = b"SVM1"

DEFAULT_C_REG = 100.0
_GAP_TOL = 1e-4
_MAX_EPOCHS = 1000


@dataclass(frozen=True, eq=False)
class LinearOvaModel:
    weights: np.ndarray  # (C, dim) float64
    biases: np.ndarray   # (C,) float64
    c_reg: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.biases, dtype=np.float64)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise ValueError(f"inconsistent shapes: weights {w.shape}, biases {b.shape}")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ValueError("model contains non-finite values")
        if self.c_reg <= 0.0:
            raise ValueError(f"C must be positive, got {self.c_reg}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def _train_binary(x_aug, y, c_reg, rng, max_epochs, tol):
    n = x_aug.shape[0]
    alpha = np.zeros(n)
    w = np.zeros(x_aug.shape[1])
    qdiag = np.einsum("nd,nd->n", x_aug, x_aug)
    qdiag = np.maximum(qdiag, 1e-12)
    for _ in range(max_epochs):
        perm = rng.permutation(n).astype(np.int64)
        kernels.dcd_epoch(x_aug, y, alpha, w, c_reg, qdiag, perm)
        margins = 1.0 - y * (x_aug @ w)
        primal = 0.5 * float(w @ w) + c_reg * float(np.maximum(margins, 0.0).sum())
        dual = float(alpha.sum()) - 0.5 * float(w @ w)
        if primal - dual <= tol * max(1.0, abs(primal)):
            break
    return w


def train_ova(
    features,
    labels,
    c_reg: float = DEFAULT_C_REG,
    seed: int = 0,
    n_classes: int | None = None,
    max_epochs: int = _MAX_EPOCHS,
) -> LinearOvaModel:
    """Train one binary separator per class label (labels are 1..C)."""
    x = np.ascontiguousarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {x.shape}")
    if y.shape != (x.shape[0],):
        raise ValueError(f"label count {y.shape} does not match samples {x.shape[0]}")
    if x.shape[0] == 0:
        raise ValueError("empty training set")
    if y.min() < 1:
        raise ValueError("labels must be >= 1")
    classes = int(n_classes or y.max())
    if y.max() > classes:
        raise ValueError(f"label {y.max()} exceeds class count {classes}")

    x_aug = np.hstack([x, np.ones((x.shape[0], 1))])
    weights = np.empty((classes, x.shape[1]))
    biases = np.empty(classes)
    for c in range(1, classes + 1):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), c]))
        y_bin = np.where(y == c, 1.0, -1.0)
        w_aug = _train_binary(x_aug, y_bin, float(c_reg), rng, max_epochs, _GAP_TOL)
        weights[c - 1] = w_aug[:-1]
        biases[c - 1] = w_aug[-1]
    return LinearOvaModel(weights=weights, biases=biases, c_reg=float(c_reg))


def score(model: LinearOvaModel, feature) -> np.ndarray:
    """Per-class decision values w_c . x + b_c."""
    x = np.asarray(feature, dtype=np.float64)
    if x.shape != (model.dim,):
        raise ValueError(f"feature length {x.shape} does not match model dim {model.dim}")
    return model.weights @ x + model.biases


def score_many(model: LinearOvaModel, features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise ValueError(f"feature shape {x.shape} does not match model dim {model.dim}")
    return x @ model.weights.T + model.biases


def predict(model: LinearOvaModel, feature) -> int:
    """Label (1..C) with the highest score; ties go to the smallest label."""
    return int(np.argmax(score(model, feature))) + 1


def predict_many(model: LinearOvaModel, features) -> np.ndarray:
    return np.argmax(score_many(model, features), axis=1) + 1


def fuse_scores(score_lists, weights=None) -> np.ndarray:
    """Elementwise (weighted) mean of per-source score vectors."""
    arrays = [np.asarray(s, dtype=np.float64) for s in score_lists]
    if not arrays:
        raise ValueError("need at least one score source")
    length = arrays[0].shape
    for arr in arrays:
        if arr.shape != length:
            raise ValueError(f"score length mismatch: {arr.shape} vs {length}")
    stack = np.stack(arrays)
    if weights is None:
        return stack.mean(axis=0)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (len(arrays),):
        raise ValueError(f"need one weight per source, got {w.shape}")
    if w.sum() == 0.0:
        raise ValueError("fusion weights sum to zero")
    return np.tensordot(w, stack, axes=1) / w.sum()


def save_ova(model: LinearOvaModel, path) -> None:
    (
        BlobWriter(SVM_MAGIC)
        .u32(model.classes)
        .u32(model.dim)
        .f64_array(np.array([model.c_reg]))
        .f64_array(model.biases)
        .f64_array(model.weights)
        .save(path)
    )


def load_ova(path) -> LinearOvaModel:
    r = BlobReader(path, SVM_MAGIC)
    classes = r.u32()
    dim = r.u32()
    c_reg = float(r.f64_array(1)[0])
    biases = r.f64_array(classes)
    weights = r.f64_array(classes * dim).reshape(classes, dim)
    r.done()
    return LinearOvaModel(weights=weights, biases=biases, c_reg=c_reg)
