"""Discriminatively weighted spatiotemporal VLAD aggregation of
grid-structured video frame descriptors, with a leave-one-group-out
evaluation harness."""

from .aggregate import (
    TrainedAggregator,
    aggregate_dsar,
    aggregate_dstar,
    aggregate_star,
    encode_video,
    load_aggregator,
    save_aggregator,
    train_dsar,
    train_dstar,
)
from .codebook import Codebook, assign, assign_many, fit_kmeans, load_codebook, save_codebook
from .encode import (
    CellVlad,
    PyramidConfig,
    RepParams,
    VideoRepresentation,
    encode_cell_segment,
    encode_cells,
    encode_lcd,
    encode_pyramid,
    load_representation,
    normalize_vlad,
    power_l2,
    save_representation,
    segment_bounds,
)
from .evaluate import CvReport, PipelineConfig, best_cell, louo_folds, run_cv, sweep
from .grids import DescriptorGrid, read_dgt, write_dgt
from .manifest import DatasetManifest, SampleMeta, parse_manifest, write_manifest
from .pca import PcaModel, apply_pca, fit_pca, load_pca, save_pca
from .svm import (
    LinearOvaModel,
    fuse_scores,
    load_ova,
    predict,
    predict_many,
    save_ova,
    score,
    score_many,
    train_ova,
)
from .synth import SynthSpec, generate
from .weights import (
    StackedViews,
    WeightMatrix,
    between_class_scatter,
    learn_weights,
    load_weights,
    save_weights,
    top_eigenvectors,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
