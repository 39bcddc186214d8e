"""Discrete L-curve, corner selection and the λ trimming window.

Grid indices in the window formulas are 1-based (``TrimWindow.lo_index``
and ``hi_index``); everything that indexes numpy arrays is 0-based and
goes through :meth:`TrimWindow.positions`.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from edgereg.errors import LCurveError

log = logging.getLogger(__name__)

WINDOW_WIDTH = 10
LCURVE_CSV_HEADER = ["lambda", "resid_norm", "constraint_norm"]
_MERGE_RTOL = 1e-12


def make_lambda_grid(hi_exp: float, lo_exp: float, count: int) -> np.ndarray:
    """``count`` values 10^t, t equally spaced over [lo_exp, hi_exp], ascending."""
    if count < 2:
        raise LCurveError(f"lambda grid needs at least 2 values, got {count}")
    if hi_exp <= lo_exp:
        raise LCurveError(f"lambda grid range is empty: hi_exp={hi_exp} <= lo_exp={lo_exp}")
    return np.logspace(lo_exp, hi_exp, count)


# ── Trimming window ──────────────────────────────────────────

@dataclass(frozen=True)
class TrimWindow:
    lo_index: int
    hi_index: int

    @property
    def width(self) -> int:
        return self.hi_index - self.lo_index + 1

    def positions(self) -> range:
        """0-based grid positions covered by the window."""
        return range(self.lo_index - 1, self.hi_index)

    def contains(self, index: int) -> bool:
        return self.lo_index <= index <= self.hi_index

    @classmethod
    def full(cls, m: int) -> TrimWindow:
        return cls(lo_index=1, hi_index=m)


def trim_window(prev_index: int, m: int) -> TrimWindow:
    """Ten consecutive grid indices starting two below ``prev_index``.

    Shifted to the first or last ten indices near either end of the grid.
    """
    if m < WINDOW_WIDTH:
        raise LCurveError(f"trim window needs at least {WINDOW_WIDTH} grid values, got {m}")
    if not 1 <= prev_index <= m:
        raise LCurveError(f"previous index {prev_index} outside 1..{m}")
    lo = max(min(prev_index - 2, m - WINDOW_WIDTH + 1), 1)
    return TrimWindow(lo_index=lo, hi_index=lo + WINDOW_WIDTH - 1)


# ── L-curve data ─────────────────────────────────────────────

@dataclass(frozen=True)
class LCurvePoint:
    lam: float
    log_resid: float
    log_constraint: float
    grid_index: int  # 1-based index into the λ grid; identifies the stored solution


@dataclass
class LCurveData:
    points: list[LCurvePoint]
    corner_index: int | None = None

    def __post_init__(self):
        lams = [p.lam for p in self.points]
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise LCurveError("L-curve points must have strictly increasing lambda")

    @classmethod
    def from_norms(cls, lambdas, resid_norms, constraint_norms, grid_indices=None) -> LCurveData:
        """Build the curve from 2-norms, taking log10 and sorting by λ.

        Points with a zero or non-finite norm have no log coordinates and are
        dropped with a warning.
        """
        lambdas = np.asarray(lambdas, dtype=np.float64)
        resid = np.asarray(resid_norms, dtype=np.float64)
        constraint = np.asarray(constraint_norms, dtype=np.float64)
        if not (lambdas.shape == resid.shape == constraint.shape):
            raise LCurveError("lambda, residual and constraint arrays differ in length")
        if grid_indices is None:
            grid_indices = np.arange(1, lambdas.size + 1)
        points = []
        for lam, r, c, idx in sorted(zip(lambdas, resid, constraint, grid_indices)):
            if not (r > 0 and c > 0 and np.isfinite(r) and np.isfinite(c)):
                log.warning("Dropping L-curve point lambda=%.3e (resid=%g, constraint=%g)", lam, r, c)
                continue
            points.append(LCurvePoint(float(lam), float(np.log10(r)), float(np.log10(c)), int(idx)))
        return cls(points=points)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])

    @property
    def coords(self) -> np.ndarray:
        """(n, 2) array of (log_resid, log_constraint)."""
        return np.array([[p.log_resid, p.log_constraint] for p in self.points]).reshape(-1, 2)

    @property
    def corner(self) -> LCurvePoint | None:
        return None if self.corner_index is None else self.points[self.corner_index]


def write_lcurve_csv(path: str | Path, data: LCurveData) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(LCURVE_CSV_HEADER)
        for p in data.points:
            writer.writerow([repr(p.lam), repr(10.0 ** p.log_resid), repr(10.0 ** p.log_constraint)])
    return path


# ── Corner ───────────────────────────────────────────────────

def _merge_duplicates(coords: np.ndarray) -> list[int]:
    """Positions kept after collapsing runs of coincident consecutive points."""
    scale = max(float(np.max(np.abs(coords))) if coords.size else 0.0, 1.0)
    keep = [0]
    for i in range(1, len(coords)):
        if np.linalg.norm(coords[i] - coords[keep[-1]]) > _MERGE_RTOL * scale:
            keep.append(i)
    return keep


def _menger(p1: np.ndarray, p2: np.ndarray, p3: np.ndarray) -> float:
    a = p2 - p1
    b = p3 - p2
    cross = a[0] * b[1] - a[1] * b[0]
    denom = np.linalg.norm(a) * np.linalg.norm(b) * np.linalg.norm(p3 - p1)
    if denom == 0.0:
        return 0.0
    return float(2.0 * cross / denom)


def curvatures(data: LCurveData) -> np.ndarray:
    """Signed curvature per point (NaN at the ends and at merged duplicates).

    Positive means the curve bends toward the origin, which is the corner
    orientation when points run in ascending λ.
    """
    coords = data.coords
    out = np.full(len(coords), np.nan)
    keep = _merge_duplicates(coords) if len(coords) else []
    for k in range(1, len(keep) - 1):
        out[keep[k]] = _menger(coords[keep[k - 1]], coords[keep[k]], coords[keep[k + 1]])
    return out


def _closest_to_origin(coords: np.ndarray) -> int:
    lo = coords.min(axis=0)
    span = coords.max(axis=0) - lo
    span[span == 0.0] = 1.0
    normalized = (coords - lo) / span
    return int(np.argmin(np.hypot(normalized[:, 0], normalized[:, 1])))


def find_corner(data: LCurveData) -> int:
    """Position in ``data.points`` of the L-curve corner; also stored on ``data``.

    The interior point of maximum positive curvature wins. Without any
    positive curvature the point nearest the normalized origin is taken.
    """
    if len(data.points) < 3:
        raise LCurveError(f"corner needs at least 3 L-curve points, got {len(data.points)}")
    kappa = curvatures(data)
    positive = np.where(np.nan_to_num(kappa, nan=-np.inf) > 0.0)[0]
    if positive.size:
        corner = int(positive[np.argmax(kappa[positive])])
    else:
        log.debug("No positive L-curve curvature; using normalized distance to the origin")
        corner = _closest_to_origin(data.coords)
    data.corner_index = corner
    return corner
