"""VLAD encoding against brute-force residual-sum oracles, normalization
arithmetic, and temporal segmentation properties."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridvlad.codebook import Codebook
from gridvlad.encode import (
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
    save_representation,
    segment_bounds,
)
from gridvlad.grids import DescriptorGrid


def brute_force_vlad(descriptors, centers):
    """Independent oracle: per-descriptor nearest scan and residual sums."""
    k, d = centers.shape
    out = np.zeros((k, d))
    for f in descriptors:
        dists = [float(np.sum((f - c) ** 2)) for c in centers]
        nearest = int(np.argmin(dists))
        out[nearest] += f - centers[nearest]
    return out.reshape(-1)


def random_instance(rng, t=None, a=2, d=None, k=None):
    t = t or int(rng.integers(1, 5))
    d = d or int(rng.integers(1, 4))
    k = k or int(rng.integers(1, 4))
    grid = DescriptorGrid(rng.normal(size=(t, a, a, d)).astype(np.float32))
    centers = rng.normal(size=(k, d))
    return grid, Codebook(centers=centers)


class TestSegmentBounds:
    def test_even_split(self):
        assert segment_bounds(8, 2) == [(0, 2), (2, 4), (4, 6), (6, 8)]

    def test_single_frame_level_zero(self):
        assert segment_bounds(1, 0) == [(0, 1)]

    def test_balanced_split_extra_to_front(self):
        assert segment_bounds(7, 1) == [(0, 4), (4, 7)]

    def test_partition_property_by_enumeration(self):
        for frames in range(1, 40):
            for level in range(4):
                bounds = segment_bounds(frames, level)
                assert len(bounds) == 2**level
                covered = []
                for start, stop in bounds:
                    assert 0 <= start <= stop <= frames
                    covered.extend(range(start, stop))
                assert covered == list(range(frames))
                sizes = [stop - start for start, stop in bounds]
                assert max(sizes) - min(sizes) <= 1

    def test_short_video_trailing_segments_empty(self):
        bounds = segment_bounds(2, 2)
        assert bounds == [(0, 1), (1, 2), (2, 2), (2, 2)]


class TestEncodeCellSegment:
    def test_descriptor_on_center_gives_zero(self):
        grid = DescriptorGrid(np.full((1, 1, 1, 1), 5.0, dtype=np.float32))
        cb = Codebook(centers=np.array([[5.0], [9.0]]))
        cv = encode_cell_segment(grid, cb, (0, 0), (0, 1))
        assert np.array_equal(cv.vector, [0.0, 0.0])

    def test_hand_computed_residuals(self):
        # Descriptors 1, 2, 11 against centers {0, 10}: residuals (3, 1).
        data = np.array([1.0, 2.0, 11.0], dtype=np.float32).reshape(3, 1, 1, 1)
        grid = DescriptorGrid(data)
        cb = Codebook(centers=np.array([[0.0], [10.0]]))
        cv = encode_cell_segment(grid, cb, (0, 0), (0, 3))
        assert np.allclose(cv.vector, [3.0, 1.0], atol=1e-12)

    def test_paper_best_setting_vector_length(self):
        rng = np.random.default_rng(0)
        grid = DescriptorGrid(rng.normal(size=(1, 1, 1, 64)).astype(np.float32))
        cb = Codebook(centers=rng.normal(size=(128, 64)))
        cv = encode_cell_segment(grid, cb, (0, 0), (0, 1))
        assert cv.vector.shape == (128 * 64,)

    def test_empty_range_is_zero_vector(self):
        rng = np.random.default_rng(1)
        grid, cb = random_instance(rng)
        cv = encode_cell_segment(grid, cb, (0, 0), (1, 1))
        assert np.array_equal(cv.vector, np.zeros(cb.k * cb.dim))

    def test_matches_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            grid, cb = random_instance(rng)
            i = int(rng.integers(grid.grid_size))
            j = int(rng.integers(grid.grid_size))
            start = int(rng.integers(0, grid.frames + 1))
            stop = int(rng.integers(start, grid.frames + 1))
            cv = encode_cell_segment(grid, cb, (i, j), (start, stop))
            expected = brute_force_vlad(
                grid.data[start:stop, i, j, :].astype(np.float64), cb.centers
            )
            assert np.allclose(cv.vector, expected, atol=1e-6)

    def test_additivity_over_disjoint_ranges(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            grid, cb = random_instance(rng, t=6)
            split = int(rng.integers(0, 7))
            full = encode_cell_segment(grid, cb, (0, 0), (0, 6)).vector
            left = encode_cell_segment(grid, cb, (0, 0), (0, split)).vector
            right = encode_cell_segment(grid, cb, (0, 0), (split, 6)).vector
            assert np.allclose(full, left + right, atol=1e-9)

    def test_frame_permutation_invariance(self):
        rng = np.random.default_rng(4)
        grid, cb = random_instance(rng, t=5)
        shuffled = DescriptorGrid(grid.data[rng.permutation(5)])
        a = encode_cell_segment(grid, cb, (0, 0), (0, 5)).vector
        b = encode_cell_segment(shuffled, cb, (0, 0), (0, 5)).vector
        assert np.allclose(a, b, atol=1e-9)

    def test_cell_out_of_range(self):
        rng = np.random.default_rng(5)
        grid, cb = random_instance(rng)
        with pytest.raises(ValueError, match="cell"):
            encode_cell_segment(grid, cb, (2, 0), (0, 1))

    def test_dim_mismatch(self):
        rng = np.random.default_rng(6)
        grid = DescriptorGrid(rng.normal(size=(1, 2, 2, 3)).astype(np.float32))
        cb = Codebook(centers=rng.normal(size=(2, 4)))
        with pytest.raises(ValueError, match="mismatch"):
            encode_cell_segment(grid, cb, (0, 0), (0, 1))


class TestNormalizeVlad:
    def test_zero_stays_zero(self):
        out = normalize_vlad(np.zeros(6), 2)
        assert np.array_equal(out, np.zeros(6))

    def test_frozen_arithmetic_example(self):
        # K=1, v=(3,4): intra (0.6, 0.8); signed sqrt; global L2.
        out = normalize_vlad(np.array([3.0, 4.0]), 1)
        assert np.allclose(out, [0.6546536707079772, 0.7559289460184544], atol=1e-12)
        assert abs(np.linalg.norm(out) - 1.0) < 1e-12

    def test_unit_norm_for_random_nonzero(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            k = int(rng.integers(1, 5))
            block = int(rng.integers(1, 5))
            v = rng.normal(size=k * block)
            out = normalize_vlad(v, k)
            assert abs(np.linalg.norm(out) - 1.0) < 1e-9

    def test_zero_block_stays_zero(self):
        v = np.array([0.0, 0.0, 3.0, 4.0])
        out = normalize_vlad(v, 2)
        assert np.array_equal(out[:2], [0.0, 0.0])
        assert abs(np.linalg.norm(out) - 1.0) < 1e-12

    def test_indivisible_length_rejected(self):
        with pytest.raises(ValueError, match="divisible"):
            normalize_vlad(np.ones(5), 2)


class TestEncodeLcd:
    def test_all_descriptors_on_centers_gives_zero(self):
        cb = Codebook(centers=np.array([[1.0], [2.0]]))
        data = np.array([1.0, 2.0, 1.0, 2.0], dtype=np.float32).reshape(1, 2, 2, 1)
        rep = encode_lcd(DescriptorGrid(data), cb)
        assert np.array_equal(rep.vector, np.zeros(2))
        assert rep.method == "lcd"

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(8)
        grid, cb = random_instance(rng, t=2, d=1, k=2)
        rep = encode_lcd(grid, cb)
        raw = brute_force_vlad(grid.descriptors().astype(np.float64), cb.centers)
        assert np.allclose(rep.vector, normalize_vlad(raw, cb.k), atol=1e-6)

    def test_length_is_k_times_d(self):
        rng = np.random.default_rng(9)
        grid = DescriptorGrid(rng.normal(size=(1, 2, 2, 16)).astype(np.float32))
        cb = Codebook(centers=rng.normal(size=(8, 16)))
        assert encode_lcd(grid, cb).vector.shape == (8 * 16,)


class TestEncodePyramid:
    def test_level_zero_matches_per_cell_encoding(self):
        rng = np.random.default_rng(10)
        grid, cb = random_instance(rng, t=3)
        pyr = encode_pyramid(grid, cb, PyramidConfig(levels=0))
        assert len(pyr) == grid.grid_size**2
        cells = encode_cells(grid, cb)
        for (i, j), cv in cells.items():
            assert np.array_equal(pyr[(i, j, 0, 0)].vector, cv.vector)

    def test_entry_count_formula(self):
        rng = np.random.default_rng(11)
        grid = DescriptorGrid(rng.normal(size=(8, 3, 3, 2)).astype(np.float32))
        cb = Codebook(centers=rng.normal(size=(2, 2)))
        pyr = encode_pyramid(grid, cb, PyramidConfig(levels=2))
        assert len(pyr) == 9 * 7

    def test_entry_count_at_full_grid_scale(self):
        # a=7 with three pyramid levels: 49 cells * 7 segments = 343 entries.
        rng = np.random.default_rng(21)
        grid = DescriptorGrid(rng.normal(size=(4, 7, 7, 2)).astype(np.float32))
        cb = Codebook(centers=rng.normal(size=(2, 2)))
        pyr = encode_pyramid(grid, cb, PyramidConfig(levels=2))
        assert len(pyr) == 343

    def test_entries_match_single_cell_oracle(self):
        rng = np.random.default_rng(12)
        grid, cb = random_instance(rng, t=5)
        config = PyramidConfig(levels=2)
        pyr = encode_pyramid(grid, cb, config)
        for (i, j, level, seg), cv in pyr.items():
            bounds = segment_bounds(grid.frames, level)[seg]
            expected = encode_cell_segment(grid, cb, (i, j), bounds)
            assert np.allclose(
                cv.vector, normalize_vlad(expected.vector, cb.k), atol=1e-6
            )

    def test_all_norms_zero_or_one(self):
        rng = np.random.default_rng(13)
        grid, cb = random_instance(rng, t=2)
        pyr = encode_pyramid(grid, cb, PyramidConfig(levels=3))
        for cv in pyr.values():
            norm = np.linalg.norm(cv.vector)
            assert norm == 0.0 or abs(norm - 1.0) < 1e-9


class TestPyramidConfig:
    def test_segment_count(self):
        assert PyramidConfig(levels=0).segment_count == 1
        assert PyramidConfig(levels=2).segment_count == 7

    def test_index_ordering(self):
        cfg = PyramidConfig(levels=2)
        assert [cfg.index(l, s) for l, s in cfg.segments()] == list(range(7))

    def test_negative_levels_rejected(self):
        with pytest.raises(ValueError):
            PyramidConfig(levels=-1)


class TestVideoRepresentationType:
    def test_norm_invariant_enforced(self):
        with pytest.raises(ValueError, match="norm"):
            VideoRepresentation(
                vector=np.array([3.0, 4.0]),
                method="lcd",
                params=RepParams(k=1, d=2, a=1),
            )

    def test_length_invariant_enforced(self):
        with pytest.raises(ValueError, match="length"):
            VideoRepresentation(
                vector=np.array([1.0]),
                method="lcd",
                params=RepParams(k=1, d=2, a=1),
            )

    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(14)
        grid, cb = random_instance(rng)
        rep = encode_lcd(grid, cb)
        save_representation(rep, tmp_path / "r.vrp")
        back = load_representation(tmp_path / "r.vrp")
        assert back.method == "lcd"
        assert back.params.k == cb.k and back.params.d == cb.dim
        assert np.allclose(back.vector, rep.vector, atol=1e-6)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), level=st.integers(0, 3), t=st.integers(1, 9))
def test_segment_vlads_sum_to_level_zero(seed, level, t):
    """Unnormalized segment encodings at one level add up to the whole-video
    encoding (additivity of the residual sum)."""
    rng = np.random.default_rng(seed)
    grid = DescriptorGrid(rng.normal(size=(t, 1, 1, 2)).astype(np.float32))
    cb = Codebook(centers=rng.normal(size=(2, 2)))
    whole = encode_cell_segment(grid, cb, (0, 0), (0, t)).vector
    parts = [
        encode_cell_segment(grid, cb, (0, 0), bounds).vector
        for bounds in segment_bounds(t, level)
    ]
    assert np.allclose(whole, np.sum(parts, axis=0), atol=1e-9)
