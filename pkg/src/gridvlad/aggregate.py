"""Weighted aggregation of per-cell(-per-segment) VLADs into video
representations, and the alternating optimization of the two weight sets.

Layout conventions (fixed so persisted vectors are comparable across
runs and languages):

  * spatial weight index for cell (i, j) is i * a + j (row-major);
  * temporal weight index for (level, segment) is 2^level - 1 + segment;
  * combined matrices flatten feature-fastest: V (F, N_sp) or
    (F, N_sp, N_tmp) is read in Fortran order.

The alternating scheme starts from a spatial solve on the level-0 cells
(iteration 0 coincides with plain spatially-weighted aggregation), then each
iteration runs the temporal step followed by the spatial step.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .codebook import Codebook
from .encode import (
    CellVlad,
    PyramidConfig,
    RepParams,
    VideoRepresentation,
    encode_cells,
    encode_lcd,
    encode_pyramid,
    power_l2,
)
from .grids import DescriptorGrid
from .weights import StackedViews, WeightMatrix, learn_weights, load_weights, save_weights


@dataclass(frozen=True, eq=False)
class TrainedAggregator:
    method: str  # "dsar", "dstar" or "star"
    grid_size: int
    pyramid: PyramidConfig
    w_sp: Optional[WeightMatrix] = None
    w_tmp: Optional[WeightMatrix] = None
    codebook_ref: Optional[str] = None
    pca_ref: Optional[str] = None

    def __post_init__(self):
        if self.method == "dsar":
            if self.w_sp is None or self.w_tmp is not None:
                raise ValueError("dsar aggregator carries spatial weights only")
            if self.pyramid.levels != 0:
                raise ValueError("dsar aggregator uses a level-0 pyramid")
        elif self.method == "dstar":
            if self.w_sp is None or self.w_tmp is None:
                raise ValueError("dstar aggregator carries both weight sets")
        elif self.method == "star":
            if self.w_sp is not None or self.w_tmp is not None:
                raise ValueError("star aggregator carries no weights")
        else:
            raise ValueError(f"unknown aggregator method {self.method!r}")
        if self.w_sp is not None and self.w_sp.weight_size != self.grid_size**2:
            raise ValueError(
                f"spatial weight size {self.w_sp.weight_size} != a^2 = {self.grid_size**2}"
            )
        if self.w_tmp is not None and self.w_tmp.weight_size != self.pyramid.segment_count:
            raise ValueError(
                f"temporal weight size {self.w_tmp.weight_size} != d = {self.pyramid.segment_count}"
            )


def _infer_grid_size(keys) -> int:
    a = max(k[0] for k in keys) + 1
    a_j = max(k[1] for k in keys) + 1
    return max(a, a_j)


def stack_spatial(cell_vlads: dict) -> np.ndarray:
    """Columns v(i, j) in row-major cell order: an (F, a^2) matrix."""
    a = _infer_grid_size(cell_vlads.keys())
    if len(cell_vlads) != a * a:
        raise ValueError(f"expected {a * a} cells, got {len(cell_vlads)}")
    cols = []
    for i in range(a):
        for j in range(a):
            if (i, j) not in cell_vlads:
                raise ValueError(f"missing cell ({i}, {j})")
            cols.append(np.asarray(cell_vlads[(i, j)].vector, dtype=np.float64))
    return np.stack(cols, axis=1)


def stack_pyramid(pyr_vlads: dict, pyramid: PyramidConfig) -> np.ndarray:
    """(F, a^2, d) tensor of the per-cell-per-segment VLADs."""
    a = _infer_grid_size(pyr_vlads.keys())
    d = pyramid.segment_count
    if len(pyr_vlads) != a * a * d:
        raise ValueError(f"expected {a * a * d} entries, got {len(pyr_vlads)}")
    feat = None
    out = None
    for i in range(a):
        for j in range(a):
            for level, seg in pyramid.segments():
                key = (i, j, level, seg)
                if key not in pyr_vlads:
                    raise ValueError(f"missing pyramid entry {key}")
                v = np.asarray(pyr_vlads[key].vector, dtype=np.float64)
                if out is None:
                    feat = v.shape[0]
                    out = np.empty((feat, a * a, d))
                out[:, i * a + j, pyramid.index(level, seg)] = v
    return out


def dsar_combination(cell_vlads: dict, w_sp: WeightMatrix) -> np.ndarray:
    """Pre-normalization weighted combination, flattened feature-fastest."""
    v_sp = stack_spatial(cell_vlads)
    if w_sp.weight_size != v_sp.shape[1]:
        raise ValueError(
            f"spatial weight size {w_sp.weight_size} != cell count {v_sp.shape[1]}"
        )
    return (v_sp @ w_sp.columns).reshape(-1, order="F")


def dstar_combination(
    pyr_vlads: dict, w_sp: WeightMatrix, w_tmp: WeightMatrix, pyramid: PyramidConfig
) -> np.ndarray:
    """Pre-normalization doubly weighted combination, flattened
    feature-fastest, then spatial component, then temporal component."""
    x = stack_pyramid(pyr_vlads, pyramid)
    if w_sp.weight_size != x.shape[1]:
        raise ValueError(
            f"spatial weight size {w_sp.weight_size} != cell count {x.shape[1]}"
        )
    if w_tmp.weight_size != x.shape[2]:
        raise ValueError(
            f"temporal weight size {w_tmp.weight_size} != segment count {x.shape[2]}"
        )
    v = np.einsum("fmt,mp,tq->fpq", x, w_sp.columns, w_tmp.columns)
    return v.reshape(-1, order="F")


def star_concatenation(pyr_vlads: dict, pyramid: PyramidConfig) -> np.ndarray:
    """Plain concatenation of the normalized entries in (i, j, level, segment)
    order."""
    x = stack_pyramid(pyr_vlads, pyramid)
    return x.transpose(1, 2, 0).reshape(-1)


def _rep_params(feature_len: int, k: int, a: int, **kw) -> RepParams:
    if feature_len % k != 0:
        raise ValueError(f"feature length {feature_len} not divisible by K={k}")
    return RepParams(k=k, d=feature_len // k, a=a, **kw)


def aggregate_dsar(cell_vlads: dict, w_sp: WeightMatrix, k: int) -> VideoRepresentation:
    """Spatially weighted aggregation: power + L2 over the combination."""
    a = _infer_grid_size(cell_vlads.keys())
    combo = dsar_combination(cell_vlads, w_sp)
    params = _rep_params(
        combo.size // w_sp.n_components, k, a, n_sp=w_sp.n_components, levels=0
    )
    return VideoRepresentation(vector=power_l2(combo), method="dsar", params=params)


def aggregate_dstar(
    pyr_vlads: dict,
    w_sp: WeightMatrix,
    w_tmp: WeightMatrix,
    pyramid: PyramidConfig,
    k: int,
) -> VideoRepresentation:
    """Spatiotemporally weighted aggregation: power + L2 over the combination."""
    a = _infer_grid_size(pyr_vlads.keys())
    combo = dstar_combination(pyr_vlads, w_sp, w_tmp, pyramid)
    params = _rep_params(
        combo.size // (w_sp.n_components * w_tmp.n_components),
        k,
        a,
        n_sp=w_sp.n_components,
        n_tmp=w_tmp.n_components,
        levels=pyramid.levels,
    )
    return VideoRepresentation(vector=power_l2(combo), method="dstar", params=params)


def aggregate_star(pyr_vlads: dict, pyramid: PyramidConfig, k: int) -> VideoRepresentation:
    """Unweighted spatiotemporal pyramid baseline."""
    a = _infer_grid_size(pyr_vlads.keys())
    concat = star_concatenation(pyr_vlads, pyramid)
    params = _rep_params(
        concat.size // (a * a * pyramid.segment_count), k, a, levels=pyramid.levels
    )
    return VideoRepresentation(vector=power_l2(concat), method="star", params=params)


def _spatial_views(stacks: list) -> list:
    # level-0 slice of each (F, a^2, d) tensor
    return [x[:, :, 0] for x in stacks]


def train_dsar(train_set, n_sp: int, classes: int | None = None) -> TrainedAggregator:
    """Learn the spatial weights from (cell-VLAD map, label) pairs."""
    if not train_set:
        raise ValueError("empty training set")
    views = [stack_spatial(cells) for cells, _ in train_set]
    labels = np.array([label for _, label in train_set])
    a = int(round(np.sqrt(views[0].shape[1])))
    if n_sp > a * a:
        raise ValueError(f"N_sp {n_sp} exceeds a^2 = {a * a}")
    stacked = StackedViews(
        views=tuple(views), labels=labels, classes=int(classes or labels.max())
    )
    w_sp = learn_weights(stacked, n_sp)
    return TrainedAggregator(
        method="dsar", grid_size=a, pyramid=PyramidConfig(levels=0), w_sp=w_sp
    )


def train_dstar(
    train_set,
    n_sp: int,
    n_tmp: int,
    levels: int,
    iters: int = 5,
    classes: int | None = None,
    delta_log: list | None = None,
) -> TrainedAggregator:
    """Alternating optimization of the spatial and temporal weights from
    (pyramid-VLAD map, label) pairs.

    No convergence check is applied beyond the fixed iteration count; if
    delta_log is given, the Frobenius norms of the per-iteration weight
    changes (d_spatial, d_temporal) are appended to it as diagnostics.
    """
    if not train_set:
        raise ValueError("empty training set")
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    pyramid = PyramidConfig(levels=levels)
    d = pyramid.segment_count
    if n_tmp > d:
        raise ValueError(f"N_tmp {n_tmp} exceeds d = {d}")

    stacks = [stack_pyramid(pyr, pyramid) for pyr, _ in train_set]
    labels = np.array([label for _, label in train_set])
    n_classes = int(classes or labels.max())
    cells = stacks[0].shape[1]
    a = int(round(np.sqrt(cells)))
    if n_sp > cells:
        raise ValueError(f"N_sp {n_sp} exceeds a^2 = {cells}")
    feat = stacks[0].shape[0]

    w_sp = learn_weights(
        StackedViews(views=tuple(_spatial_views(stacks)), labels=labels, classes=n_classes),
        n_sp,
    )
    w_tmp = None
    for _ in range(iters):
        # Temporal step: fix the spatial weights, stack per-segment columns.
        views_t = tuple(
            np.einsum("fmt,mp->fpt", x, w_sp.columns).reshape(feat * n_sp, d, order="F")
            for x in stacks
        )
        prev_tmp = w_tmp
        w_tmp = learn_weights(
            StackedViews(views=views_t, labels=labels, classes=n_classes), n_tmp
        )
        # Spatial step: fix the temporal weights, stack per-cell columns.
        views_s = tuple(
            np.einsum("fmt,tq->fqm", x, w_tmp.columns).reshape(feat * n_tmp, cells, order="F")
            for x in stacks
        )
        prev_sp = w_sp
        w_sp = learn_weights(
            StackedViews(views=views_s, labels=labels, classes=n_classes), n_sp
        )
        if delta_log is not None:
            d_sp = float(np.linalg.norm(w_sp.columns - prev_sp.columns))
            d_tmp = (
                float(np.linalg.norm(w_tmp.columns - prev_tmp.columns))
                if prev_tmp is not None
                else float("nan")
            )
            delta_log.append((d_sp, d_tmp))
    return TrainedAggregator(
        method="dstar", grid_size=a, pyramid=pyramid, w_sp=w_sp, w_tmp=w_tmp
    )


def encode_video(
    grid: DescriptorGrid,
    codebook: Codebook,
    method: str,
    aggregator: Optional[TrainedAggregator] = None,
    pyramid: Optional[PyramidConfig] = None,
) -> VideoRepresentation:
    """Run the per-method encoding pipeline for one video."""
    if method == "lcd":
        return encode_lcd(grid, codebook)
    if method == "star":
        if pyramid is None:
            raise ValueError("star encoding needs a pyramid config")
        return aggregate_star(encode_pyramid(grid, codebook, pyramid), pyramid, codebook.k)
    if aggregator is None or aggregator.method != method:
        raise ValueError(f"{method} encoding needs a trained {method} aggregator")
    if method == "dsar":
        return aggregate_dsar(encode_cells(grid, codebook), aggregator.w_sp, codebook.k)
    if method == "dstar":
        return aggregate_dstar(
            encode_pyramid(grid, codebook, aggregator.pyramid),
            aggregator.w_sp,
            aggregator.w_tmp,
            aggregator.pyramid,
            codebook.k,
        )
    raise ValueError(f"unknown method {method!r}")


def save_aggregator(agg: TrainedAggregator, bundle_dir) -> None:
    """Persist as a directory bundle: text descriptor plus weight blobs."""
    bundle = Path(bundle_dir)
    bundle.mkdir(parents=True, exist_ok=True)
    lines = [
        f"method = {agg.method}",
        f"grid_size = {agg.grid_size}",
        f"levels = {agg.pyramid.levels}",
        f"codebook_ref = {agg.codebook_ref or ''}",
        f"pca_ref = {agg.pca_ref or ''}",
    ]
    (bundle / "aggregator.txt").write_text("\n".join(lines) + "\n")
    if agg.w_sp is not None:
        save_weights(agg.w_sp, bundle / "w_sp.wgt")
    if agg.w_tmp is not None:
        save_weights(agg.w_tmp, bundle / "w_tmp.wgt")


def load_aggregator(bundle_dir) -> TrainedAggregator:
    bundle = Path(bundle_dir)
    fields = {}
    for line in (bundle / "aggregator.txt").read_text().splitlines():
        if "=" in line:
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    w_sp = load_weights(bundle / "w_sp.wgt") if (bundle / "w_sp.wgt").exists() else None
    w_tmp = load_weights(bundle / "w_tmp.wgt") if (bundle / "w_tmp.wgt").exists() else None
    return TrainedAggregator(
        method=fields["method"],
        grid_size=int(fields["grid_size"]),
        pyramid=PyramidConfig(levels=int(fields["levels"])),
        w_sp=w_sp,
        w_tmp=w_tmp,
        codebook_ref=fields.get("codebook_ref") or None,
        pca_ref=fields.get("pca_ref") or None,
    )
