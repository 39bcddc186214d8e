"""Tests for edgereg.lcurve."""
import csv

import numpy as np
import pytest

from edgereg.errors import LCurveError
from edgereg.lcurve import (
    LCurveData,
    LCurvePoint,
    TrimWindow,
    curvatures,
    find_corner,
    make_lambda_grid,
    trim_window,
    write_lcurve_csv,
)


def _curve(coords, lambdas=None):
    lambdas = np.arange(1, len(coords) + 1, dtype=float) if lambdas is None else lambdas
    return LCurveData(points=[
        LCurvePoint(lam=float(l), log_resid=float(x), log_constraint=float(y), grid_index=i + 1)
        for i, (l, (x, y)) in enumerate(zip(lambdas, coords))
    ])


def _diagonal_tikhonov(lambdas, n=64, eps=1e-4):
    """Filtered solutions of diag(σ) x = σ + noise with σ_i = 10^(−8i/63)."""
    sigma = 10.0 ** (-8.0 * np.arange(n) / (n - 1))
    signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    b = sigma + eps * signs
    resid, constraint, errors = [], [], []
    for lam in lambdas:
        x = sigma * b / (sigma ** 2 + lam ** 2)
        resid.append(np.linalg.norm(sigma * x - b))
        constraint.append(np.linalg.norm(x))
        errors.append(np.linalg.norm(x - 1.0))
    return np.array(resid), np.array(constraint), np.array(errors)


class TestMakeLambdaGrid:
    def test_default_grid(self):
        grid = make_lambda_grid(2, -3, 30)
        assert grid.size == 30
        assert grid[0] == pytest.approx(1e-3, rel=1e-14)
        assert grid[-1] == pytest.approx(1e2, rel=1e-14)
        np.testing.assert_allclose(grid[1:] / grid[:-1], 10 ** (5 / 29), rtol=1e-12)

    def test_decades(self):
        np.testing.assert_allclose(make_lambda_grid(1, -1, 3), [0.1, 1.0, 10.0], rtol=1e-15)

    def test_degenerate_range_rejected(self):
        with pytest.raises(LCurveError):
            make_lambda_grid(0, 0, 2)

    def test_too_few_values_rejected(self):
        with pytest.raises(LCurveError):
            make_lambda_grid(2, -3, 1)


class TestTrimWindow:
    @pytest.mark.parametrize("prev,expected", [(5, (3, 12)), (1, (1, 10)), (29, (21, 30)), (30, (21, 30))])
    def test_windows(self, prev, expected):
        w = trim_window(prev, 30)
        assert (w.lo_index, w.hi_index) == expected

    def test_width_and_bounds_for_every_index(self):
        for m in (10, 11, 30):
            for i in range(1, m + 1):
                w = trim_window(i, m)
                assert w.width == 10
                assert 1 <= w.lo_index and w.hi_index <= m

    def test_monotone(self):
        los = [trim_window(i, 30).lo_index for i in range(1, 31)]
        assert los == sorted(los)

    def test_contains_previous_index(self):
        for i in range(1, 31):
            assert trim_window(i, 30).contains(i)

    def test_short_grid_rejected(self):
        with pytest.raises(LCurveError):
            trim_window(3, 9)

    def test_positions_are_zero_based(self):
        assert list(TrimWindow(3, 12).positions()) == list(range(2, 12))
        assert TrimWindow.full(5).width == 5


class TestLCurveData:
    def test_from_norms_sorts_and_logs(self):
        data = LCurveData.from_norms([10.0, 0.1, 1.0], [100.0, 1.0, 10.0], [0.01, 1.0, 0.1])
        np.testing.assert_allclose(data.lambdas, [0.1, 1.0, 10.0])
        np.testing.assert_allclose(data.coords, [[0, 0], [1, -1], [2, -2]], atol=1e-15)
        assert [p.grid_index for p in data.points] == [2, 3, 1]

    def test_zero_norms_dropped(self, caplog):
        with caplog.at_level("WARNING"):
            data = LCurveData.from_norms([1.0, 2.0, 3.0], [1.0, 0.0, 2.0], [1.0, 1.0, 1.0])
        assert len(data.points) == 2
        assert "Dropping" in caplog.text

    def test_lambdas_must_increase(self):
        with pytest.raises(LCurveError):
            _curve([(0, 0), (1, 1)], lambdas=[2.0, 1.0])

    def test_csv(self, tmp_path):
        data = LCurveData.from_norms([0.1, 1.0], [2.0, 3.0], [4.0, 5.0])
        with open(write_lcurve_csv(tmp_path / "l.csv", data)) as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["lambda", "resid_norm", "constraint_norm"]
        assert float(rows[1][1]) == pytest.approx(2.0, rel=1e-14)
        assert float(rows[2][2]) == pytest.approx(5.0, rel=1e-14)


class TestFindCorner:
    def test_right_angle(self):
        data = _curve([(0, 2), (0, 1), (0, 0), (1, 0), (2, 0)])
        assert find_corner(data) == 2
        assert data.corner_index == 2
        assert data.corner.grid_index == 3

    def test_corner_has_positive_curvature(self):
        kappa = curvatures(_curve([(0, 2), (0, 1), (0, 0), (1, 0), (2, 0)]))
        assert np.isnan(kappa[0]) and np.isnan(kappa[-1])
        assert kappa[2] > 0
        assert kappa[1] == pytest.approx(0.0) and kappa[3] == pytest.approx(0.0)

    def test_collinear_falls_back_to_distance(self):
        data = _curve([(0, 1), (0.25, 0.75), (0.5, 0.5), (0.75, 0.25), (1, 0)])
        assert find_corner(data) == 2

    def test_concave_turn_is_not_a_corner(self):
        # bends away from the origin only
        data = _curve([(0, 2), (1, 2), (2, 2), (2, 1), (2, 0)])
        assert np.nanmax(curvatures(data)) <= 0
        assert find_corner(data) == 0

    def test_duplicates_merged(self):
        data = _curve([(0, 2), (0, 1), (0, 0), (0, 0), (1, 0), (2, 0)])
        assert find_corner(data) == 2

    def test_shift_invariance(self):
        coords = np.array([(0, 3), (0.1, 2), (0.3, 1), (1, 0.6), (2, 0.5), (3, 0.45)])
        base = find_corner(_curve(coords))
        assert find_corner(_curve(coords + [5.0, 0.0])) == base
        assert find_corner(_curve(coords + [0.0, -7.0])) == base

    def test_too_few_points(self):
        with pytest.raises(LCurveError):
            find_corner(_curve([(0, 1), (1, 0)]))


class TestSyntheticTikhonov:
    grid = make_lambda_grid(1, -9, 21)

    def test_corner_near_error_minimizer(self):
        resid, constraint, errors = _diagonal_tikhonov(self.grid)
        data = LCurveData.from_norms(self.grid, resid, constraint)
        corner = find_corner(data)
        assert abs(corner - int(np.argmin(errors))) <= 2

    def test_trimmed_window_keeps_the_corner(self):
        resid, constraint, _ = _diagonal_tikhonov(self.grid)
        full = LCurveData.from_norms(self.grid, resid, constraint)
        full_index = full.points[find_corner(full)].grid_index
        window = trim_window(full_index, self.grid.size)
        pos = list(window.positions())
        trimmed = LCurveData.from_norms(self.grid[pos], resid[pos], constraint[pos],
                                        grid_indices=[p + 1 for p in pos])
        assert trimmed.points[find_corner(trimmed)].grid_index == full_index
