"""Between-class scatter, the trace identity, and the Jacobi eigensolver."""

import numpy as np
import pytest

from gridvlad.weights import (
    StackedViews,
    WeightMatrix,
    between_class_scatter,
    learn_weights,
    load_weights,
    save_weights,
    spatial_heatmap,
    top_eigenvectors,
)


def trace_sb_oracle(views, labels, w):
    """tr S_b computed directly from the projected features x_i = V_i w,
    independent of the scatter-matrix construction."""
    x = np.stack([v @ w for v in views])
    labels = np.asarray(labels)
    overall = x.mean(axis=0)
    total = 0.0
    for c in np.unique(labels):
        xc = x[labels == c]
        diff = xc.mean(axis=0) - overall
        total += xc.shape[0] * float(diff @ diff)
    return total / x.shape[0]


def random_views(rng, n=12, f=5, m=4, classes=3):
    views = [rng.normal(size=(f, m)) for _ in range(n)]
    labels = np.array([1 + i % classes for i in range(n)])
    return views, labels, classes


class TestBetweenClassScatter:
    def test_identical_views_give_zero(self):
        v = np.arange(6.0).reshape(2, 3)
        sv = StackedViews(views=(v, v.copy(), v.copy()), labels=np.array([1, 2, 1]), classes=2)
        assert np.allclose(between_class_scatter(sv), np.zeros((3, 3)), atol=1e-12)

    def test_hand_computed_two_sample_case(self):
        v1 = np.array([[1.0, 0.0]])
        v2 = np.array([[0.0, 1.0]])
        sv = StackedViews(views=(v1, v2), labels=np.array([1, 2]), classes=2)
        sigma = between_class_scatter(sv)
        assert np.allclose(sigma, [[0.25, -0.25], [-0.25, 0.25]], atol=1e-12)

    def test_trace_identity_against_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            views, labels, classes = random_views(
                rng,
                n=int(rng.integers(4, 15)),
                f=int(rng.integers(1, 6)),
                m=int(rng.integers(2, 6)),
                classes=int(rng.integers(2, 4)),
            )
            sv = StackedViews(views=tuple(views), labels=labels, classes=classes)
            sigma = between_class_scatter(sv)
            w = rng.normal(size=sigma.shape[0])
            assert abs(float(w @ sigma @ w) - trace_sb_oracle(views, labels, w)) < 1e-6

    def test_symmetric_psd(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            views, labels, classes = random_views(rng)
            sigma = between_class_scatter(
                StackedViews(views=tuple(views), labels=labels, classes=classes)
            )
            assert np.allclose(sigma, sigma.T, atol=1e-12)
            assert np.linalg.eigvalsh(sigma).min() >= -1e-9

    def test_constant_shift_invariance(self):
        rng = np.random.default_rng(2)
        views, labels, classes = random_views(rng)
        shift = rng.normal(size=views[0].shape)
        a = between_class_scatter(StackedViews(tuple(views), labels, classes))
        b = between_class_scatter(
            StackedViews(tuple(v + shift for v in views), labels, classes)
        )
        assert np.allclose(a, b, atol=1e-9)

    def test_scaling_scales_eigenvalues_quadratically(self):
        rng = np.random.default_rng(3)
        views, labels, classes = random_views(rng)
        alpha = 3.0
        wa = learn_weights(StackedViews(tuple(views), labels, classes), 2)
        wb = learn_weights(
            StackedViews(tuple(alpha * v for v in views), labels, classes), 2
        )
        assert np.allclose(wb.eigenvalues, alpha**2 * wa.eigenvalues, atol=1e-6)
        for col in range(2):
            a, b = wa.columns[:, col], wb.columns[:, col]
            assert np.allclose(a, b, atol=1e-6) or np.allclose(a, -b, atol=1e-6)

    def test_single_class_rejected(self):
        v = np.ones((2, 2))
        sv = StackedViews(views=(v, v), labels=np.array([1, 1]), classes=1)
        with pytest.raises(ValueError, match=">= 2 classes"):
            between_class_scatter(sv)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            StackedViews(
                views=(np.ones((2, 2)), np.ones((2, 3))),
                labels=np.array([1, 2]),
                classes=2,
            )


class TestTopEigenvectors:
    def test_diagonal_matrix(self):
        wm = top_eigenvectors(np.diag([3.0, 1.0, 2.0]), 2)
        assert np.allclose(wm.eigenvalues, [3.0, 2.0], atol=1e-10)
        assert np.allclose(np.abs(wm.columns[:, 0]), [1, 0, 0], atol=1e-10)
        assert np.allclose(np.abs(wm.columns[:, 1]), [0, 0, 1], atol=1e-10)

    def test_analytic_two_by_two(self):
        wm = top_eigenvectors(np.array([[2.0, 1.0], [1.0, 2.0]]), 1)
        assert abs(wm.eigenvalues[0] - 3.0) < 1e-10
        inv_sqrt2 = 1.0 / np.sqrt(2.0)
        assert np.allclose(wm.columns[:, 0], [inv_sqrt2, inv_sqrt2], atol=1e-10)

    def test_rayleigh_quotient_sampling_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            m = 10
            half = rng.normal(size=(m, m))
            sigma = half @ half.T
            wm = top_eigenvectors(sigma, 3)
            u = rng.normal(size=(10_000, m))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            rayleigh = np.einsum("nm,mk,nk->n", u, sigma, u)
            assert wm.eigenvalues[0] >= rayleigh.max() - 1e-6

    def test_matches_lapack_on_random_psd(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            m = int(rng.integers(2, 12))
            half = rng.normal(size=(m, m))
            sigma = half @ half.T
            wm = top_eigenvectors(sigma, m)
            ref = np.sort(np.linalg.eigvalsh(sigma))[::-1]
            assert np.allclose(np.sort(wm.eigenvalues)[::-1], ref, atol=1e-8)

    def test_eigen_equation_holds(self):
        rng = np.random.default_rng(6)
        half = rng.normal(size=(6, 6))
        sigma = half @ half.T
        wm = top_eigenvectors(sigma, 4)
        for col in range(4):
            w = wm.columns[:, col]
            assert np.allclose(sigma @ w, wm.eigenvalues[col] * w, atol=1e-8)
            assert abs(float(w @ sigma @ w) - wm.eigenvalues[col]) < 1e-6

    def test_columns_orthonormal(self):
        rng = np.random.default_rng(7)
        half = rng.normal(size=(8, 8))
        wm = top_eigenvectors(half @ half.T, 8)
        assert np.allclose(wm.columns.T @ wm.columns, np.eye(8), atol=1e-6)

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError, match="symmetric"):
            top_eigenvectors(np.array([[1.0, 2.0], [0.0, 1.0]]), 1)

    def test_too_many_components_rejected(self):
        with pytest.raises(ValueError, match="n_components"):
            top_eigenvectors(np.eye(3), 4)

    def test_deterministic_sign(self):
        rng = np.random.default_rng(8)
        half = rng.normal(size=(5, 5))
        sigma = half @ half.T
        a = top_eigenvectors(sigma, 3)
        b = top_eigenvectors(sigma.copy(), 3)
        assert np.array_equal(a.columns, b.columns)
        lead = np.abs(a.columns).argmax(axis=0)
        assert np.all(a.columns[lead, np.arange(3)] > 0)


class TestLearnWeights:
    def test_signal_concentrated_in_first_coordinate(self):
        rng = np.random.default_rng(9)
        views = []
        labels = []
        for n in range(40):
            label = 1 + n % 2
            v = rng.normal(scale=0.05, size=(6, 4))
            v[:, 0] += 1.0 if label == 1 else -1.0
            views.append(v)
            labels.append(label)
        wm = learn_weights(
            StackedViews(tuple(views), np.array(labels), classes=2), 2
        )
        assert abs(wm.columns[0, 0]) > 0.99

    def test_full_component_count_gives_square_orthogonal(self):
        rng = np.random.default_rng(10)
        views, labels, classes = random_views(rng, m=5)
        wm = learn_weights(StackedViews(tuple(views), labels, classes), 5)
        assert wm.columns.shape == (5, 5)
        assert np.allclose(wm.columns.T @ wm.columns, np.eye(5), atol=1e-8)

    def test_component_count_five_accepted(self):
        rng = np.random.default_rng(11)
        views, labels, classes = random_views(rng, n=20, f=4, m=9)
        wm = learn_weights(StackedViews(tuple(views), labels, classes), 5)
        assert wm.n_components == 5


class TestWeightMatrixType:
    def test_orthonormality_enforced(self):
        with pytest.raises(ValueError, match="orthonormal"):
            WeightMatrix(
                columns=np.array([[1.0, 1.0], [0.0, 0.0]]),
                eigenvalues=np.array([2.0, 1.0]),
            )

    def test_descending_order_enforced(self):
        with pytest.raises(ValueError, match="descending"):
            WeightMatrix(columns=np.eye(2), eigenvalues=np.array([1.0, 2.0]))

    def test_negative_eigenvalue_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            WeightMatrix(columns=np.eye(2), eigenvalues=np.array([1.0, -0.5]))

    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(12)
        half = rng.normal(size=(9, 9))
        wm = top_eigenvectors(half @ half.T, 4)
        save_weights(wm, tmp_path / "w.wgt")
        back = load_weights(tmp_path / "w.wgt")
        assert back.weight_size == 9 and back.n_components == 4
        assert np.allclose(back.columns, wm.columns, atol=1e-5)
        assert np.allclose(back.eigenvalues, wm.eigenvalues, rtol=1e-5)

    def test_spatial_heatmap_shape(self):
        wm = top_eigenvectors(np.diag(np.arange(9, 0, -1.0)), 2)
        grid = spatial_heatmap(wm, 3, component=0)
        assert grid.shape == (3, 3)
        assert np.allclose(grid.reshape(-1), np.abs(wm.columns[:, 0]))
