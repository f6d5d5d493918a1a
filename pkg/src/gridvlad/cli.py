"""Command-line surface binding all stages into reproducible runs.

Every subcommand prints its resolved configuration (including the derived
stage seeds) before doing any work, never mutates its inputs, and exits
nonzero with a one-line diagnostic on failure. GRIDVLAD_THREADS overrides
--threads.
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import aggregate as agg
from . import evaluate as ev
from . import svm, synth
from .codebook import fit_kmeans, load_codebook, save_codebook
from .encode import PyramidConfig, save_representation
from .grids import read_dgt
from .manifest import parse_manifest
from .pca import apply_pca, fit_pca, load_pca, save_pca
from .seeding import (
    STAGE_KMEANS,
    STAGE_PCA,
    STAGE_SVM,
    STAGE_SYNTH,
    derive_seed,
)
from .weights import load_weights, spatial_heatmap

_DEFAULTS = {"k": 128, "dim": 64, "n_sp": 5, "n_tmp": 5, "levels": 2, "iters": 5,
             "c_reg": 100.0, "seed": 0, "sample_cap": 200_000}


def _threads(args) -> int:
    env = os.environ.get("GRIDVLAD_THREADS")
    if env:
        return max(1, int(env))
    if getattr(args, "threads", None):
        return max(1, args.threads)
    return os.cpu_count() or 1


def _echo_config(name: str, items) -> None:
    print(f"[{name}] resolved config:")
    for key, value in items:
        print(f"  {key} = {value}")


def _seed_items(seed: int) -> list:
    return [
        ("seed", seed),
        ("seed.synth", derive_seed(seed, STAGE_SYNTH)),
        ("seed.pca", derive_seed(seed, STAGE_PCA)),
        ("seed.kmeans", derive_seed(seed, STAGE_KMEANS)),
        ("seed.svm", derive_seed(seed, STAGE_SVM)),
    ]


def _sampled_descriptors(manifest, pca_model, cap, seed):
    pools = []
    for s in manifest.samples:
        grid = read_dgt(s.path)
        if pca_model is not None:
            grid = apply_pca(pca_model, grid)
        pools.append(grid.descriptors())
    pool = np.concatenate(pools)
    if pool.shape[0] > cap:
        rng = np.random.default_rng(seed)
        pick = rng.choice(pool.shape[0], size=cap, replace=False)
        pick.sort()
        pool = pool[pick]
    return pool


def _cmd_synth_gen(args) -> int:
    cells = args.signal_cell if args.signal_cell else ["1,1"]
    segments = args.signal_segment if args.signal_segment is not None else [0]
    spec = synth.SynthSpec(
        classes=args.classes,
        samples_per_class=args.samples_per_class,
        frames=args.T,
        grid_size=args.a,
        dim=args.D,
        signal_cells=tuple(tuple(int(v) for v in c.split(",")) for c in cells),
        signal_segments=tuple(segments),
        signal_level=args.signal_level,
        mu=args.mu,
        sigma=args.sigma,
        groups=args.groups,
        seed=derive_seed(args.seed, STAGE_SYNTH),
    )
    _echo_config("synth-gen", _seed_items(args.seed) + [("out", args.out), ("spec", spec)])
    manifest = synth.generate(spec, args.out)
    print(f"wrote {len(manifest.samples)} samples to {args.out}")
    return 0


def _cmd_fit_pca(args) -> int:
    _echo_config("fit-pca", _seed_items(args.seed) + [
        ("manifest", args.manifest), ("D", args.D),
        ("sample_cap", args.sample_cap), ("out", args.out),
    ])
    manifest = parse_manifest(args.manifest)
    pool = _sampled_descriptors(
        manifest, None, args.sample_cap, derive_seed(args.seed, STAGE_PCA)
    )
    model = fit_pca(pool, args.D)
    save_pca(model, args.out)
    print(f"fitted PCA {model.input_dim} -> {model.output_dim} on {pool.shape[0]} descriptors")
    return 0


def _cmd_fit_codebook(args) -> int:
    _echo_config("fit-codebook", _seed_items(args.seed) + [
        ("manifest", args.manifest), ("K", args.K), ("pca", args.pca),
        ("sample_cap", args.sample_cap), ("out", args.out),
    ])
    manifest = parse_manifest(args.manifest)
    pca_model = load_pca(args.pca) if args.pca else None
    pool = _sampled_descriptors(
        manifest, pca_model, args.sample_cap, derive_seed(args.seed, STAGE_KMEANS)
    )
    codebook = fit_kmeans(pool, args.K, derive_seed(args.seed, STAGE_KMEANS))
    save_codebook(codebook, args.out)
    print(f"fitted codebook K={codebook.k} D={codebook.dim} on {pool.shape[0]} descriptors")
    return 0


def _load_grids(manifest, pca_model):
    grids = {}
    for s in manifest.samples:
        grid = read_dgt(s.path)
        grids[s.sample_id] = apply_pca(pca_model, grid) if pca_model else grid
    return grids


def _check_breadth(args, a: int) -> None:
    if args.method in ("dsar", "dstar") and args.n_sp > a * a:
        raise ValueError(f"N_sp exceeds a^2={a * a}")
    if args.method == "dstar":
        d = 2 ** (args.levels + 1) - 1
        if args.n_tmp > d:
            raise ValueError(f"N_tmp exceeds d={d}")


def _warn_ignored(args) -> None:
    if args.method in ("lcd", "star"):
        for name, flag in (("N-sp", "n_sp"), ("N-tmp", "n_tmp")):
            if getattr(args, flag, None) is not None:
                print(f"warning: --{name} is ignored for method {args.method}",
                      file=sys.stderr)


def _fill_breadth_defaults(args) -> None:
    if getattr(args, "n_sp", None) is None:
        args.n_sp = _DEFAULTS["n_sp"]
    if getattr(args, "n_tmp", None) is None:
        args.n_tmp = _DEFAULTS["n_tmp"]


def _cmd_train_weights(args) -> int:
    _warn_ignored(args)
    _fill_breadth_defaults(args)
    _echo_config("train-weights", _seed_items(args.seed) + [
        ("manifest", args.manifest), ("method", args.method),
        ("N_sp", args.n_sp), ("N_tmp", args.n_tmp), ("L", args.levels),
        ("iters", args.iters), ("out", args.out),
    ])
    if args.method not in ("dsar", "dstar"):
        raise ValueError("train-weights supports methods dsar and dstar")
    manifest = parse_manifest(args.manifest)
    pca_model = load_pca(args.pca) if args.pca else None
    codebook = load_codebook(args.codebook)
    grids = _load_grids(manifest, pca_model)
    a = next(iter(grids.values())).grid_size
    _check_breadth(args, a)

    labels = [s.class_label for s in manifest.samples]
    if args.method == "dsar":
        maps = [agg.encode_cells(grids[s.sample_id], codebook) for s in manifest.samples]
        trained = agg.train_dsar(list(zip(maps, labels)), args.n_sp, classes=manifest.classes)
    else:
        pyramid = PyramidConfig(levels=args.levels)
        maps = [agg.encode_pyramid(grids[s.sample_id], codebook, pyramid) for s in manifest.samples]
        delta_log = [] if args.report_deltas else None
        trained = agg.train_dstar(
            list(zip(maps, labels)), args.n_sp, args.n_tmp, args.levels,
            iters=args.iters, classes=manifest.classes, delta_log=delta_log,
        )
        if delta_log is not None:
            for it, (d_sp, d_tmp) in enumerate(delta_log, start=1):
                print(f"iter {it}: |dW_sp|_F = {d_sp:.6g}, |dW_tmp|_F = {d_tmp:.6g}")
    trained = agg.TrainedAggregator(
        method=trained.method, grid_size=trained.grid_size, pyramid=trained.pyramid,
        w_sp=trained.w_sp, w_tmp=trained.w_tmp,
        codebook_ref=str(args.codebook), pca_ref=str(args.pca) if args.pca else None,
    )
    agg.save_aggregator(trained, args.out)
    print(f"trained {args.method} weights -> {args.out}")
    return 0


def _cmd_encode(args) -> int:
    _warn_ignored(args)
    _echo_config("encode", _seed_items(args.seed) + [
        ("manifest", args.manifest), ("method", args.method),
        ("L", args.levels), ("weights", args.weights), ("out", args.out),
    ])
    manifest = parse_manifest(args.manifest)
    pca_model = load_pca(args.pca) if args.pca else None
    codebook = load_codebook(args.codebook)
    aggregator = agg.load_aggregator(args.weights) if args.weights else None
    if args.method in ("dsar", "dstar") and aggregator is None:
        raise ValueError(f"method {args.method} needs --weights")
    pyramid = PyramidConfig(levels=args.levels)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for s in manifest.samples:
        grid = read_dgt(s.path)
        if pca_model:
            grid = apply_pca(pca_model, grid)
        rep = agg.encode_video(grid, codebook, args.method, aggregator, pyramid)
        save_representation(rep, out / f"{s.sample_id}.vrp")
    print(f"encoded {len(manifest.samples)} videos -> {out}")
    return 0


def _cmd_train_classifier(args) -> int:
    _echo_config("train-classifier", _seed_items(args.seed) + [
        ("manifest", args.manifest), ("features", args.features),
        ("C_reg", args.c_reg), ("out", args.out),
    ])
    from .encode import load_representation

    manifest = parse_manifest(args.manifest)
    features = []
    labels = []
    for s in manifest.samples:
        rep = load_representation(Path(args.features) / f"{s.sample_id}.vrp")
        features.append(rep.vector)
        labels.append(s.class_label)
    model = svm.train_ova(
        np.stack(features), labels, c_reg=args.c_reg,
        seed=derive_seed(args.seed, STAGE_SVM), n_classes=manifest.classes,
    )
    svm.save_ova(model, args.out)
    print(f"trained {model.classes}-class linear model -> {args.out}")
    return 0


def _pipeline_config(args) -> ev.PipelineConfig:
    return ev.PipelineConfig(
        method=args.method,
        k=args.K,
        dim=args.D,
        n_sp=args.n_sp,
        n_tmp=args.n_tmp,
        levels=args.levels,
        c_reg=args.c_reg,
        iters=args.iters,
        seed=args.seed,
        pca_sample_cap=args.sample_cap,
        pca_scope="all" if args.pca_on_all else "train",
        threads=_threads(args),
    )


def _cmd_evaluate(args) -> int:
    _warn_ignored(args)
    _fill_breadth_defaults(args)
    manifest = parse_manifest(args.manifest)
    config = _pipeline_config(args)
    _echo_config("evaluate", _seed_items(args.seed) + config.as_items()
                 + [("threads", config.threads), ("out", args.out)])
    report = ev.run_cv(manifest, config)
    text = report.render_text()
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text)
        (out / "confusion.csv").write_text(report.confusion_csv())
        print(f"report written to {out}")
    return 0


def _cmd_sweep(args) -> int:
    _fill_breadth_defaults(args)
    manifest = parse_manifest(args.manifest)
    method = args.method
    threads = _threads(args)
    configs = []
    for k in args.K:
        for dim in args.D:
            breadths = args.n_sp if method == "dsar" else (
                args.n_tmp if method == "dstar" else [args.n_sp[0]]
            )
            for breadth in breadths:
                cfg = ev.PipelineConfig(
                    method=method, k=k, dim=dim,
                    n_sp=breadth if method == "dsar" else args.n_sp[0],
                    n_tmp=breadth if method == "dstar" else args.n_tmp[0],
                    levels=args.levels, c_reg=args.c_reg, iters=args.iters,
                    seed=args.seed, pca_sample_cap=args.sample_cap,
                    pca_scope="all" if args.pca_on_all else "train",
                    threads=threads,
                )
                configs.append(cfg)
    _echo_config("sweep", _seed_items(args.seed) + [
        ("method", method), ("K", args.K), ("D", args.D),
        ("N_sp", args.n_sp), ("N_tmp", args.n_tmp), ("cells", len(configs)),
    ])
    cells = ev.sweep(manifest, configs)
    table = ev.sweep_table(cells)
    print(table, end="")
    best = ev.best_cell(cells)
    print(f"best cell: K={best.config.k} D={best.config.dim} "
          f"N_sp={best.config.n_sp} N_tmp={best.config.n_tmp} "
          f"accuracy={best.report.mean_accuracy:.4f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.txt").write_text(table)
        for n, cell in enumerate(cells):
            if cell.report is not None:
                (out / f"cell{n:03d}.txt").write_text(cell.report.render_text())
        print(f"sweep written to {out}")
    return 0


def _cmd_export_heatmap(args) -> int:
    _echo_config("export-heatmap", [("weights", args.weights), ("out", args.out)])
    bundle = Path(args.weights)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if bundle.is_dir():
        trained = agg.load_aggregator(bundle)
        w_sp, w_tmp = trained.w_sp, trained.w_tmp
        a = trained.grid_size
        pyramid = trained.pyramid
    else:
        w_sp = load_weights(bundle)
        a = int(round(np.sqrt(w_sp.weight_size)))
        w_tmp, pyramid = None, None
    if w_sp is not None:
        grid = spatial_heatmap(w_sp, a, component=args.component)
        lines = [",".join(f"{v:.6f}" for v in row) for row in grid]
        (out / "spatial_heatmap.csv").write_text("\n".join(lines) + "\n")
        print(f"spatial heatmap ({a}x{a}) -> {out / 'spatial_heatmap.csv'}")
    if w_tmp is not None:
        mags = np.abs(w_tmp.columns[:, args.component])
        lines = ["level,segment,magnitude"]
        for (level, seg), value in zip(pyramid.segments(), mags):
            lines.append(f"{level},{seg},{value:.6f}")
        (out / "temporal_heatmap.csv").write_text("\n".join(lines) + "\n")
        print(f"temporal heatmap -> {out / 'temporal_heatmap.csv'}")
    return 0


def _add_common(p, with_method=True):
    p.add_argument("--seed", type=int, default=_DEFAULTS["seed"])
    if with_method:
        p.add_argument("--method", choices=("lcd", "star", "dsar", "dstar"),
                       default="dstar")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridvlad",
        description="Discriminatively weighted spatiotemporal VLAD aggregation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-gen", help="generate a synthetic biased dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--samples-per-class", type=int, default=40)
    p.add_argument("--T", type=int, default=8)
    p.add_argument("--a", type=int, default=3)
    p.add_argument("--D", type=int, default=16)
    p.add_argument("--signal-cell", action="append", default=None,
                   help="i,j of a signal cell (repeatable); default 1,1")
    p.add_argument("--signal-segment", type=int, action="append", default=None,
                   help="leaf segment index carrying signal (repeatable); default 0")
    p.add_argument("--signal-level", type=int, default=1)
    p.add_argument("--mu", type=float, default=1.5)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--groups", type=int, default=4)
    _add_common(p, with_method=False)
    p.set_defaults(func=_cmd_synth_gen)

    p = sub.add_parser("fit-pca", help="fit the descriptor PCA")
    p.add_argument("--manifest", required=True)
    p.add_argument("--D", type=int, default=_DEFAULTS["dim"])
    p.add_argument("--sample-cap", type=int, default=_DEFAULTS["sample_cap"])
    p.add_argument("--out", required=True)
    _add_common(p, with_method=False)
    p.set_defaults(func=_cmd_fit_pca)

    p = sub.add_parser("fit-codebook", help="fit the K-means codebook")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pca", default=None)
    p.add_argument("--K", type=int, default=_DEFAULTS["k"])
    p.add_argument("--sample-cap", type=int, default=_DEFAULTS["sample_cap"])
    p.add_argument("--out", required=True)
    _add_common(p, with_method=False)
    p.set_defaults(func=_cmd_fit_codebook)

    p = sub.add_parser("train-weights", help="learn aggregation weights")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pca", default=None)
    p.add_argument("--codebook", required=True)
    p.add_argument("--N-sp", dest="n_sp", type=int, default=None)
    p.add_argument("--N-tmp", dest="n_tmp", type=int, default=None)
    p.add_argument("--L", dest="levels", type=int, default=_DEFAULTS["levels"])
    p.add_argument("--iters", type=int, default=_DEFAULTS["iters"])
    p.add_argument("--report-deltas", action="store_true",
                   help="print |dW|_F per alternating iteration")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_train_weights)

    p = sub.add_parser("encode", help="encode videos into VRP1 representations")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pca", default=None)
    p.add_argument("--codebook", required=True)
    p.add_argument("--weights", default=None, help="aggregator bundle for dsar/dstar")
    p.add_argument("--N-sp", dest="n_sp", type=int, default=None)
    p.add_argument("--N-tmp", dest="n_tmp", type=int, default=None)
    p.add_argument("--L", dest="levels", type=int, default=_DEFAULTS["levels"])
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("train-classifier", help="train the one-vs-all linear model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True, help="directory of VRP1 files")
    p.add_argument("--C-reg", dest="c_reg", type=float, default=_DEFAULTS["c_reg"])
    p.add_argument("--out", required=True)
    _add_common(p, with_method=False)
    p.set_defaults(func=_cmd_train_classifier)

    p = sub.add_parser("evaluate", help="leave-one-group-out evaluation")
    p.add_argument("--manifest", required=True)
    p.add_argument("--K", type=int, default=_DEFAULTS["k"])
    p.add_argument("--D", type=int, default=_DEFAULTS["dim"])
    p.add_argument("--N-sp", dest="n_sp", type=int, default=None)
    p.add_argument("--N-tmp", dest="n_tmp", type=int, default=None)
    p.add_argument("--L", dest="levels", type=int, default=_DEFAULTS["levels"])
    p.add_argument("--iters", type=int, default=_DEFAULTS["iters"])
    p.add_argument("--C-reg", dest="c_reg", type=float, default=_DEFAULTS["c_reg"])
    p.add_argument("--sample-cap", type=int, default=_DEFAULTS["sample_cap"])
    p.add_argument("--pca-on-all", action="store_true",
                   help="fit PCA on all samples instead of the training folds")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep", help="grid sweep over K, D and N_sp/N_tmp")
    p.add_argument("--manifest", required=True)
    p.add_argument("--K", type=lambda s: [int(v) for v in s.split(",")], default=[64, 128])
    p.add_argument("--D", type=lambda s: [int(v) for v in s.split(",")], default=[64])
    p.add_argument("--N-sp", dest="n_sp", type=lambda s: [int(v) for v in s.split(",")],
                   default=[5])
    p.add_argument("--N-tmp", dest="n_tmp", type=lambda s: [int(v) for v in s.split(",")],
                   default=[5])
    p.add_argument("--L", dest="levels", type=int, default=_DEFAULTS["levels"])
    p.add_argument("--iters", type=int, default=_DEFAULTS["iters"])
    p.add_argument("--C-reg", dest="c_reg", type=float, default=_DEFAULTS["c_reg"])
    p.add_argument("--sample-cap", type=int, default=_DEFAULTS["sample_cap"])
    p.add_argument("--pca-on-all", action="store_true")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("export-heatmap", help="write weight-magnitude CSV grids")
    p.add_argument("--weights", required=True, help="aggregator bundle or WGT1 file")
    p.add_argument("--component", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_heatmap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def run() -> None:
    raise SystemExit(main())
