"""CLI surface: subcommand wiring, config echo, range validation, artifacts."""

import pathlib

import pytest

from gridvlad.cli import main
from gridvlad.grids import read_dgt
from gridvlad.manifest import parse_manifest


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds")
    code = main([
        "synth-gen", "--out", str(root),
        "--classes", "3", "--samples-per-class", "4",
        "--T", "4", "--a", "2", "--D", "6",
        "--signal-cell", "0,0", "--signal-segment", "0",
        "--signal-level", "0", "--mu", "8.0", "--sigma", "1.0",
        "--groups", "2", "--seed", "3",
    ])
    assert code == 0
    return root


class TestSynthGen:
    def test_writes_dataset(self, dataset):
        manifest = parse_manifest(dataset / "manifest.tsv")
        assert len(manifest.samples) == 12
        grid = read_dgt(manifest.samples[0].path)
        assert grid.data.shape == (4, 2, 2, 6)

    def test_reproducible(self, dataset, tmp_path, capsys):
        code = main([
            "synth-gen", "--out", str(tmp_path),
            "--classes", "3", "--samples-per-class", "4",
            "--T", "4", "--a", "2", "--D", "6",
            "--signal-cell", "0,0", "--signal-segment", "0",
            "--signal-level", "0", "--mu", "8.0", "--sigma", "1.0",
            "--groups", "2", "--seed", "3",
        ])
        assert code == 0
        first = parse_manifest(dataset / "manifest.tsv")
        second = parse_manifest(tmp_path / "manifest.tsv")
        for a, b in zip(first.samples, second.samples):
            assert pathlib.Path(a.path).read_bytes() == pathlib.Path(b.path).read_bytes()


class TestStageCommands:
    def test_full_stage_chain(self, dataset, tmp_path, capsys):
        manifest = str(dataset / "manifest.tsv")
        pca = str(tmp_path / "model.pca")
        cbk = str(tmp_path / "model.cbk")
        bundle = str(tmp_path / "weights")
        feats = str(tmp_path / "feats")
        svm_path = str(tmp_path / "model.svm")

        assert main(["fit-pca", "--manifest", manifest, "--D", "4", "--out", pca]) == 0
        assert main(["fit-codebook", "--manifest", manifest, "--pca", pca,
                     "--K", "2", "--out", cbk]) == 0
        assert main(["train-weights", "--manifest", manifest, "--pca", pca,
                     "--codebook", cbk, "--method", "dstar", "--N-sp", "2",
                     "--N-tmp", "2", "--L", "1", "--out", bundle]) == 0
        assert main(["encode", "--manifest", manifest, "--pca", pca,
                     "--codebook", cbk, "--method", "dstar", "--weights", bundle,
                     "--L", "1", "--out", feats]) == 0
        assert main(["train-classifier", "--manifest", manifest,
                     "--features", feats, "--out", svm_path]) == 0
        assert main(["export-heatmap", "--weights", bundle,
                     "--out", str(tmp_path / "maps")]) == 0

        out = capsys.readouterr().out
        assert "resolved config" in out
        spatial = (tmp_path / "maps" / "spatial_heatmap.csv").read_text()
        assert len(spatial.strip().split("\n")) == 2  # a = 2
        temporal = (tmp_path / "maps" / "temporal_heatmap.csv").read_text()
        assert temporal.startswith("level,segment,")


class TestEvaluate:
    def test_evaluate_runs_and_writes_report(self, dataset, tmp_path, capsys):
        code = main([
            "evaluate", "--manifest", str(dataset / "manifest.tsv"),
            "--method", "lcd", "--K", "2", "--D", "4", "--L", "0",
            "--seed", "0", "--threads", "1", "--out", str(tmp_path / "rep"),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "resolved config" in out
        assert "seed.pca" in out
        assert "pooled_accuracy" in out
        assert (tmp_path / "rep" / "report.txt").exists()
        assert (tmp_path / "rep" / "confusion.csv").exists()

    def test_lcd_warns_on_ignored_flags(self, dataset, capsys):
        code = main([
            "evaluate", "--manifest", str(dataset / "manifest.tsv"),
            "--method", "lcd", "--K", "2", "--D", "4", "--L", "0",
            "--N-sp", "2", "--threads", "1",
        ])
        assert code == 0
        assert "ignored for method lcd" in capsys.readouterr().err

    def test_n_sp_out_of_range_fails_with_diagnostic(self, dataset, capsys):
        code = main([
            "evaluate", "--manifest", str(dataset / "manifest.tsv"),
            "--method", "dsar", "--K", "2", "--D", "4", "--L", "0",
            "--N-sp", "50", "--threads", "1",
        ])
        assert code != 0
        assert "N_sp exceeds a^2=4" in capsys.readouterr().err

    def test_missing_file_fails_cleanly(self, tmp_path, capsys):
        code = main([
            "evaluate", "--manifest", str(tmp_path / "absent.tsv"),
            "--method", "lcd", "--threads", "1",
        ])
        assert code != 0
        assert "error:" in capsys.readouterr().err

    def test_env_var_overrides_threads(self, dataset, monkeypatch, capsys):
        monkeypatch.setenv("GRIDVLAD_THREADS", "2")
        code = main([
            "evaluate", "--manifest", str(dataset / "manifest.tsv"),
            "--method", "lcd", "--K", "2", "--D", "4", "--L", "0",
            "--threads", "1",
        ])
        assert code == 0
        assert "threads = 2" in capsys.readouterr().out


class TestDefaults:
    def test_published_configuration_parses(self):
        from gridvlad.cli import build_parser

        args = build_parser().parse_args([
            "evaluate", "--manifest", "m.tsv", "--method", "dstar",
            "--K", "128", "--D", "64", "--N-sp", "5", "--N-tmp", "5",
            "--L", "2", "--iters", "5", "--C-reg", "100",
        ])
        assert (args.K, args.D, args.n_sp, args.n_tmp) == (128, 64, 5, 5)
        assert (args.levels, args.iters, args.c_reg) == (2, 5, 100.0)

    def test_out_of_box_defaults_match_published_best(self):
        from gridvlad.cli import build_parser

        args = build_parser().parse_args(["evaluate", "--manifest", "m.tsv"])
        assert args.method == "dstar"
        assert (args.K, args.D, args.levels, args.iters) == (128, 64, 2, 5)
        assert args.c_reg == 100.0


class TestSweep:
    def test_sweep_table_and_best_cell(self, dataset, tmp_path, capsys):
        code = main([
            "sweep", "--manifest", str(dataset / "manifest.tsv"),
            "--method", "lcd", "--K", "1,2", "--D", "4", "--L", "0",
            "--threads", "1", "--out", str(tmp_path / "sweep"),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "best cell:" in out
        assert (tmp_path / "sweep" / "sweep.txt").exists()
