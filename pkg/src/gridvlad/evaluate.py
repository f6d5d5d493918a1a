"""Leave-one-group-out cross-validation, reporting, and parameter sweeps.

Every fold fits PCA, the codebook, the aggregation weights, and the
classifier on the training groups only (pca_scope="all" opts into fitting
PCA on the full dataset instead). Stage seeds are derived from the master
seed and the fold index, so a report is reproducible bit for bit.
"""

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import aggregate as agg
from . import svm
from .codebook import fit_kmeans
from .encode import PyramidConfig
from .grids import read_dgt
from .manifest import DatasetManifest
from .pca import apply_pca, fit_pca
from .seeding import (
    STAGE_KMEANS,
    STAGE_KMEANS_SAMPLE,
    STAGE_PCA_SAMPLE,
    STAGE_SVM,
    derive_seed,
)

_METHODS = ("lcd", "star", "dsar", "dstar")


@dataclass(frozen=True)
class PipelineConfig:
    method: str = "dstar"
    k: int = 128
    dim: Optional[int] = 64      # PCA output dim; None keeps raw descriptors
    n_sp: int = 5
    n_tmp: int = 5
    levels: int = 2
    c_reg: float = 100.0
    iters: int = 5
    seed: int = 0
    pca_sample_cap: int = 200_000
    pca_scope: str = "train"     # "train" (leakage-safe) or "all"
    kmeans_iters: int = 100
    threads: int = 1

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}, got {self.method!r}")
        if self.pca_scope not in ("train", "all"):
            raise ValueError(f"pca_scope must be train or all, got {self.pca_scope!r}")
        if self.k < 1 or (self.dim is not None and self.dim < 1):
            raise ValueError("k and dim must be positive")
        if self.levels < 0 or self.iters < 1 or self.threads < 1:
            raise ValueError("levels must be >= 0, iters and threads >= 1")

    def as_items(self) -> list:
        return [
            ("method", self.method),
            ("K", self.k),
            ("D", self.dim if self.dim is not None else "raw"),
            ("N_sp", self.n_sp),
            ("N_tmp", self.n_tmp),
            ("L", self.levels),
            ("C_reg", self.c_reg),
            ("iters", self.iters),
            ("seed", self.seed),
            ("pca_sample_cap", self.pca_sample_cap),
            ("pca_scope", self.pca_scope),
            ("kmeans_iters", self.kmeans_iters),
        ]


@dataclass(frozen=True, eq=False)
class CvReport:
    config: PipelineConfig
    fold_groups: tuple           # group id per fold, in fold order
    fold_accuracies: tuple
    fold_test_counts: tuple
    confusion: np.ndarray        # (C, C) int64, rows = true label - 1
    mean_accuracy: float         # pooled: trace / total
    fold_mean_accuracy: float

    def __post_init__(self):
        conf = np.asarray(self.confusion, dtype=np.int64)
        if conf.ndim != 2 or conf.shape[0] != conf.shape[1]:
            raise ValueError(f"confusion matrix must be square, got {conf.shape}")
        total = int(conf.sum())
        if total:
            pooled = float(np.trace(conf)) / total
            if abs(pooled - self.mean_accuracy) > 1e-12:
                raise ValueError("mean accuracy does not match the confusion matrix")
        object.__setattr__(self, "confusion", conf)

    def confusion_csv(self) -> str:
        out = io.StringIO()
        c = self.confusion.shape[0]
        out.write("true\\pred," + ",".join(str(j + 1) for j in range(c)) + "\n")
        for i in range(c):
            out.write(str(i + 1) + "," + ",".join(str(v) for v in self.confusion[i]) + "\n")
        return out.getvalue()

    def render_text(self) -> str:
        lines = ["gridvlad cross-validation report", "", "[config]"]
        for key, value in self.config.as_items():
            lines.append(f"{key} = {value}")
        lines.append("")
        lines.append("[folds]")
        lines.append("group\ttest_count\taccuracy")
        for group, acc, count in zip(
            self.fold_groups, self.fold_accuracies, self.fold_test_counts
        ):
            lines.append(f"{group}\t{count}\t{acc!r}")
        lines.append("")
        lines.append("[summary]")
        lines.append(f"samples = {int(self.confusion.sum())}")
        lines.append(f"pooled_accuracy = {self.mean_accuracy!r}")
        lines.append(f"fold_mean_accuracy = {self.fold_mean_accuracy!r}")
        lines.append("")
        lines.append("[confusion]")
        lines.append(self.confusion_csv().rstrip("\n"))
        return "\n".join(lines) + "\n"


def louo_folds(manifest: DatasetManifest) -> list:
    """One (train_ids, test_ids) pair per group, ordered by group id."""
    groups = manifest.group_ids()
    if len(groups) < 2:
        raise ValueError("leave-one-group-out needs at least 2 distinct groups")
    folds = []
    for group in groups:
        test = tuple(s.sample_id for s in manifest.samples if s.group_id == group)
        train = tuple(s.sample_id for s in manifest.samples if s.group_id != group)
        folds.append((train, test))
    return folds


def _subsample(rows: np.ndarray, cap: int, seed: int) -> np.ndarray:
    if rows.shape[0] <= cap:
        return rows
    rng = np.random.default_rng(seed)
    pick = rng.choice(rows.shape[0], size=cap, replace=False)
    pick.sort()
    return rows[pick]


def _encode_all(metas, grids, config, codebook, aggregator, pyramid, threads):
    def one(meta):
        return agg.encode_video(
            grids[meta.sample_id], codebook, config.method, aggregator, pyramid
        ).vector

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vectors = list(pool.map(one, metas))
    else:
        vectors = [one(m) for m in metas]
    return np.stack(vectors)


def _maps_for_training(metas, grids, config, codebook, threads):
    pyramid = PyramidConfig(levels=config.levels)

    def builder(meta):
        if config.method == "dsar":
            return agg.encode_cells(grids[meta.sample_id], codebook)
        return agg.encode_pyramid(grids[meta.sample_id], codebook, pyramid)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            maps = list(pool.map(builder, metas))
    else:
        maps = [builder(m) for m in metas]
    return maps


def _run_fold(manifest, grids, config, fold_index, group, train_ids, test_ids, fit_log):
    by_id = manifest.by_id()
    train = [by_id[i] for i in train_ids]
    test = [by_id[i] for i in test_ids]

    def log(stage, metas):
        if fit_log is not None:
            fit_log.append(
                {"fold": group, "stage": stage, "sample_ids": tuple(m.sample_id for m in metas)}
            )

    # PCA
    work = dict(grids)
    if config.dim is not None:
        pca_metas = list(manifest.samples) if config.pca_scope == "all" else train
        log("pca", pca_metas)
        pool = np.concatenate([work[m.sample_id].descriptors() for m in pca_metas])
        pool = _subsample(
            pool, config.pca_sample_cap, derive_seed(config.seed, STAGE_PCA_SAMPLE, fold_index)
        )
        model = fit_pca(pool, config.dim)
        work = {sid: apply_pca(model, g) for sid, g in work.items()}

    # Codebook
    log("kmeans", train)
    pool = np.concatenate([work[m.sample_id].descriptors() for m in train])
    pool = _subsample(
        pool, config.pca_sample_cap, derive_seed(config.seed, STAGE_KMEANS_SAMPLE, fold_index)
    )
    codebook = fit_kmeans(
        pool, config.k, derive_seed(config.seed, STAGE_KMEANS, fold_index),
        max_iters=config.kmeans_iters,
    )

    # Aggregation weights
    aggregator = None
    pyramid = PyramidConfig(levels=config.levels)
    labels = np.array([m.class_label for m in train])
    if config.method in ("dsar", "dstar"):
        log("weights", train)
        maps = _maps_for_training(train, work, config, codebook, config.threads)
        pairs = list(zip(maps, labels))
        if config.method == "dsar":
            aggregator = agg.train_dsar(pairs, config.n_sp, classes=manifest.classes)
        else:
            aggregator = agg.train_dstar(
                pairs, config.n_sp, config.n_tmp, config.levels,
                iters=config.iters, classes=manifest.classes,
            )

    # Classifier
    log("classifier", train)
    x_train = _encode_all(train, work, config, codebook, aggregator, pyramid, config.threads)
    model = svm.train_ova(
        x_train, labels, c_reg=config.c_reg,
        seed=derive_seed(config.seed, STAGE_SVM, fold_index),
        n_classes=manifest.classes,
    )

    x_test = _encode_all(test, work, config, codebook, aggregator, pyramid, config.threads)
    predictions = svm.predict_many(model, x_test)
    return [(m.class_label, int(p)) for m, p in zip(test, predictions)]


def run_cv(manifest: DatasetManifest, config: PipelineConfig, fit_log=None) -> CvReport:
    """Full leave-one-group-out evaluation of one pipeline configuration."""
    if not manifest.samples:
        raise ValueError("manifest has no samples")
    grids = {s.sample_id: read_dgt(s.path) for s in manifest.samples}
    dims = {g.dim for g in grids.values()}
    sizes = {g.grid_size for g in grids.values()}
    if len(dims) != 1 or len(sizes) != 1:
        raise ValueError(
            f"inconsistent dataset: descriptor dims {sorted(dims)}, grid sizes {sorted(sizes)}"
        )
    a = sizes.pop()
    if config.method in ("dsar", "dstar") and config.n_sp > a * a:
        raise ValueError(f"N_sp exceeds a^2={a * a} (got {config.n_sp})")
    if config.method == "dstar":
        d = PyramidConfig(levels=config.levels).segment_count
        if config.n_tmp > d:
            raise ValueError(f"N_tmp exceeds d={d} (got {config.n_tmp})")

    folds = louo_folds(manifest)
    groups = manifest.group_ids()
    c = manifest.classes
    confusion = np.zeros((c, c), dtype=np.int64)
    fold_accs = []
    fold_counts = []
    for fold_index, ((train_ids, test_ids), group) in enumerate(zip(folds, groups)):
        try:
            outcomes = _run_fold(
                manifest, grids, config, fold_index, group, train_ids, test_ids, fit_log
            )
        except Exception as exc:
            raise RuntimeError(f"fold {group!r} failed: {exc}") from exc
        hits = 0
        for true, pred in outcomes:
            confusion[true - 1, pred - 1] += 1
            hits += int(true == pred)
        fold_accs.append(hits / len(outcomes))
        fold_counts.append(len(outcomes))

    total = int(confusion.sum())
    return CvReport(
        config=config,
        fold_groups=tuple(groups),
        fold_accuracies=tuple(fold_accs),
        fold_test_counts=tuple(fold_counts),
        confusion=confusion,
        mean_accuracy=float(np.trace(confusion)) / total,
        fold_mean_accuracy=float(np.mean(fold_accs)),
    )


@dataclass(frozen=True, eq=False)
class SweepCell:
    config: PipelineConfig
    report: Optional[CvReport]
    error: Optional[str] = None


def sweep(manifest: DatasetManifest, configs, fit_log=None) -> list:
    """Evaluate every config; failed cells are marked and do not stop the sweep."""
    configs = list(configs)
    if not configs:
        raise ValueError("empty sweep grid")
    cells = []
    for config in configs:
        try:
            cells.append(SweepCell(config=config, report=run_cv(manifest, config, fit_log)))
        except Exception as exc:
            cells.append(SweepCell(config=config, report=None, error=str(exc)))
    return cells


def best_cell(cells) -> SweepCell:
    """Highest pooled accuracy; ties keep the earliest grid position."""
    usable = [c for c in cells if c.report is not None]
    if not usable:
        raise ValueError("no successful sweep cells")
    best = usable[0]
    for cell in usable[1:]:
        if cell.report.mean_accuracy > best.report.mean_accuracy:
            best = cell
    return best


def sweep_table(cells) -> str:
    """Text table in the style of the parameter-analysis tables: one row per
    descriptor dimension, one column per (K, N_sp or N_tmp) pair."""

    def col_key(cfg):
        breadth = cfg.n_tmp if cfg.method == "dstar" else cfg.n_sp
        return (cfg.k, breadth if cfg.method in ("dsar", "dstar") else 0)

    rows = sorted({c.config.dim for c in cells}, key=lambda v: (v is None, v))
    cols = sorted({col_key(c.config) for c in cells})
    by_pos = {}
    for cell in cells:
        by_pos[(cell.config.dim, col_key(cell.config))] = cell

    method = cells[0].config.method
    breadth_name = "N_tmp" if method == "dstar" else "N_sp"
    header = ["D\\(K," + breadth_name + ")"] + [f"K={k},{n}" for k, n in cols]
    lines = ["\t".join(header)]
    for dim in rows:
        row = [str(dim) if dim is not None else "raw"]
        for col in cols:
            cell = by_pos.get((dim, col))
            if cell is None:
                row.append("-")
            elif cell.report is None:
                row.append("FAILED")
            else:
                row.append(f"{100.0 * cell.report.mean_accuracy:.1f}")
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"
