"""Tests for edgereg.problems."""
import numpy as np
import pytest

from edgereg.errors import ConfigError
from edgereg.operators import build_gradient
from edgereg.problems import (
    GRAINS_PALETTE,
    LIMITED_ANGLES,
    BlurSpec,
    TomoGeometry,
    add_noise,
    blur_kernel,
    blur_matrix,
    build_problem,
    grains_like,
    mirror_lr,
    shepp_logan,
    shepp_logan_value,
    to_image,
    tomo_matrix,
)


class TestSheppLogan:
    def test_center_value(self):
        n = 17
        img = to_image(shepp_logan(n), n)
        assert img[n // 2, n // 2] == pytest.approx(1.02)
        assert shepp_logan_value(0.0, 0.0) == pytest.approx(1.02)

    def test_value_range(self):
        x = shepp_logan(64)
        assert x.min() >= 0.0
        assert x.max() <= 2.0
        assert x.size == 64 * 64

    def test_nearly_mirror_symmetric(self):
        x = shepp_logan(64)
        assert np.max(np.abs(x - mirror_lr(x, 64))) <= 0.02 + 1e-12

    def test_top_row_is_outside_the_head(self):
        img = to_image(shepp_logan(32), 32)
        np.testing.assert_array_equal(img[0], 0.0)

    def test_too_small(self):
        with pytest.raises(ConfigError):
            shepp_logan(8)


class TestGrainsLike:
    def test_deterministic(self):
        np.testing.assert_array_equal(grains_like(32, seed=3), grains_like(32, seed=3))

    def test_seed_changes_image(self):
        assert not np.array_equal(grains_like(32, seed=1), grains_like(32, seed=2))

    def test_palette_values_only(self):
        assert set(np.unique(grains_like(32, seed=0))) <= set(GRAINS_PALETTE)

    def test_sparse_gradient(self):
        g = build_gradient(64, 64)
        v = g.op.apply(grains_like(64, seed=0))
        assert np.count_nonzero(v) / v.size < 0.15


class TestTomoMatrix:
    def test_axis_aligned_rays_have_full_chords(self):
        A = tomo_matrix(TomoGeometry(n=16, angles=[0.0]))
        np.testing.assert_allclose(np.asarray(A.sum(axis=1)).ravel(), 16.0, rtol=1e-12)

    def test_zero_degree_row_hits_one_image_column(self):
        A = tomo_matrix(TomoGeometry(n=8, angles=[0.0]))
        cols = A[3].indices
        np.testing.assert_array_equal(np.sort(cols), np.arange(3 * 8, 4 * 8))

    def test_diagonal_chords(self):
        n = 16
        g = TomoGeometry(n=n, angles=[45.0])
        A = tomo_matrix(g)
        h = n / 2
        expected = 2 * np.sqrt(2) * h - 2 * np.abs(g.offsets())
        np.testing.assert_allclose(A @ np.ones(n * n), expected, rtol=1e-10)

    def test_sinogram_symmetry_for_transpose_symmetric_image(self, rng):
        n = 32
        R = rng.uniform(0, 1, (n, n))
        x = (R + R.T).ravel(order="F")
        A = tomo_matrix(TomoGeometry(n=n, angles=[0.0, 90.0]))
        sino = A @ x
        np.testing.assert_allclose(sino[n:], sino[:n][::-1], rtol=1e-12)

    def test_entries_nonnegative_and_bounded(self):
        n = 16
        A = tomo_matrix(TomoGeometry(n=n, angles=[0.0, 17.0, 45.0, 90.0, 133.0]))
        assert A.data.min() >= 0.0
        assert np.asarray(A.sum(axis=1)).max() <= n * np.sqrt(2) + 1e-9

    def test_limited_angle_row_count(self):
        g = TomoGeometry(n=64, angles=LIMITED_ANGLES)
        assert len(LIMITED_ANGLES) == 66
        assert g.n_rays == 4224
        assert tomo_matrix(g).shape == (4224, 4096)

    @pytest.mark.parametrize("kwargs", [
        {"angles": []},
        {"angles": [180.0]},
        {"angles": [0.0], "detector_count": 4},
    ])
    def test_invalid_geometry(self, kwargs):
        with pytest.raises(ConfigError):
            TomoGeometry(n=8, **kwargs)


class TestBlurMatrix:
    def test_first_kernel_value(self):
        z = blur_kernel(64, 8, 1.5)
        total = sum(np.exp(-k ** 2 / 4.5) for k in range(8))
        assert z[0] == pytest.approx(1.0 / (2 * total - 1), rel=1e-14)
        assert np.all(z[8:] == 0.0)

    def test_default_widths(self):
        spec = BlurSpec(n=64, m=64)
        assert spec.sigma1 == pytest.approx(1.5)
        assert spec.sigma2 == pytest.approx(1.25)

    def test_factors_symmetric_and_banded(self):
        from edgereg.problems import symmetric_toeplitz
        A1 = symmetric_toeplitz(blur_kernel(32, 8, 0.75)).toarray()
        np.testing.assert_array_equal(A1, A1.T)
        i, j = np.nonzero(A1)
        assert np.max(np.abs(i - j)) == 7

    def test_interior_row_sums_are_one(self):
        from edgereg.problems import symmetric_toeplitz
        A1 = symmetric_toeplitz(blur_kernel(32, 8, 0.75))
        sums = np.asarray(A1.sum(axis=1)).ravel()
        np.testing.assert_allclose(sums[7:-7], 1.0, rtol=1e-14)

    def test_kron_shape(self):
        assert blur_matrix(BlurSpec(n=64, m=64)).shape == (4096, 4096)

    def test_rectangular_image(self):
        A = blur_matrix(BlurSpec(n=16, m=8))
        assert A.shape == (128, 128)

    def test_separable_action(self, rng):
        n, m = 16, 12
        spec = BlurSpec(n=n, m=m)
        from edgereg.problems import symmetric_toeplitz
        A1 = symmetric_toeplitz(blur_kernel(n, spec.band1, spec.sigma1)).toarray()
        A2 = symmetric_toeplitz(blur_kernel(m, spec.band2, spec.sigma2)).toarray()
        X = rng.standard_normal((m, n))
        got = blur_matrix(spec) @ X.ravel(order="F")
        np.testing.assert_allclose(got, (A2 @ X @ A1.T).ravel(order="F"), atol=1e-13)

    def test_band_larger_than_image(self):
        with pytest.raises(ConfigError):
            BlurSpec(n=4, m=4)


class TestAddNoise:
    def test_zero_level(self, rng):
        b = rng.standard_normal(10)
        np.testing.assert_array_equal(add_noise(b, 0.0, seed=1), b)

    def test_exact_level(self, rng):
        b = rng.standard_normal(50)
        out = add_noise(b, 0.01, seed=7)
        assert np.linalg.norm(out - b) / np.linalg.norm(b) == pytest.approx(0.01, abs=1e-12)

    def test_deterministic(self, rng):
        b = rng.standard_normal(20)
        np.testing.assert_array_equal(add_noise(b, 0.05, seed=3), add_noise(b, 0.05, seed=3))

    def test_negative_level(self):
        with pytest.raises(ConfigError):
            add_noise(np.ones(3), -0.1)


class TestBuildProblem:
    def test_blur_problem(self, blur_problem_16):
        p = blur_problem_16
        assert p.A.shape == (256, 256)
        assert p.shape == (16, 16)
        assert p.descriptor["kind"] == "blur"
        assert np.linalg.norm(p.b - p.b_true) / np.linalg.norm(p.b_true) == pytest.approx(0.01)

    def test_tomo_full(self, tomo_problem_16):
        assert tomo_problem_16.A.shape == (180 * 16, 256)
        assert tomo_problem_16.descriptor["phantom"] == "shepp_logan"

    def test_relative_error(self, blur_problem_16):
        assert blur_problem_16.relative_error(blur_problem_16.x_true) == 0.0

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            build_problem("mri", 16)
