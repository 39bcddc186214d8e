"""Test problems: parallel-beam tomography, Gaussian blur, phantoms and noise.

All images are square n × n (the blur operator also accepts n × m) and are
vectorized column-major. In world coordinates the image occupies
[−n/2, n/2]² with pixel (i, j) covering x ∈ [−n/2 + j, −n/2 + j + 1] and
y ∈ [n/2 − i − 1, n/2 − i]; row 0 is the top of the image.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from edgereg import sparse
from edgereg.errors import ConfigError
from edgereg.sparse import DenseVector, SparseMatrix

log = logging.getLogger(__name__)

MIN_PHANTOM_SIZE = 16
GRAINS_PALETTE = (0.2, 0.4, 0.6, 0.8, 1.0)
_PARALLEL_EPS = 1e-12
_MIN_SEGMENT = 1e-12

# Classic Shepp–Logan: (intensity, semi-axis a, semi-axis b, x0, y0, angle in degrees)
SHEPP_LOGAN_ELLIPSES = (
    (2.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0),
    (-0.98, 0.6624, 0.8740, 0.00, -0.0184, 0.0),
    (-0.02, 0.1100, 0.3100, 0.22, 0.0000, -18.0),
    (-0.02, 0.1600, 0.4100, -0.22, 0.0000, 18.0),
    (0.01, 0.2100, 0.2500, 0.00, 0.3500, 0.0),
    (0.01, 0.0460, 0.0460, 0.00, 0.1000, 0.0),
    (0.01, 0.0460, 0.0460, 0.00, -0.1000, 0.0),
    (0.01, 0.0460, 0.0230, -0.08, -0.6050, 0.0),
    (0.01, 0.0230, 0.0230, 0.00, -0.6060, 0.0),
    (0.01, 0.0230, 0.0460, 0.06, -0.6050, 0.0),
)

FULL_ANGLES = tuple(range(0, 180, 1))
LIMITED_ANGLES = tuple(range(0, 131, 2))


def _to_vector(img: np.ndarray) -> DenseVector:
    return np.asarray(img, dtype=np.float64).ravel(order="F")


def to_image(x, n_v: int, n_h: int | None = None) -> np.ndarray:
    """Inverse of the column-major vectorization."""
    n_h = n_v if n_h is None else n_h
    return np.asarray(x, dtype=np.float64).reshape(n_v, n_h, order="F")


def mirror_lr(x, n: int) -> DenseVector:
    """Left-right mirror image of an n × n vectorized image."""
    return _to_vector(to_image(x, n)[:, ::-1])


# ── Phantoms ─────────────────────────────────────────────────

def _check_phantom_size(n: int) -> None:
    if n < MIN_PHANTOM_SIZE:
        raise ConfigError(f"phantom size must be >= {MIN_PHANTOM_SIZE}, got {n}")


def shepp_logan_value(x, y) -> np.ndarray:
    """Sum of the classic ellipse intensities at points (x, y) of [−1, 1]²."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    out = np.zeros(np.broadcast(x, y).shape)
    for value, a, b, x0, y0, angle in SHEPP_LOGAN_ELLIPSES:
        phi = np.deg2rad(angle)
        dx, dy = x - x0, y - y0
        xr = dx * np.cos(phi) + dy * np.sin(phi)
        yr = -dx * np.sin(phi) + dy * np.cos(phi)
        out += np.where((xr / a) ** 2 + (yr / b) ** 2 <= 1.0, value, 0.0)
    return out


def shepp_logan(n: int) -> DenseVector:
    """The 10-ellipse Shepp–Logan phantom sampled at n × n pixel centers."""
    _check_phantom_size(n)
    centers = -1.0 + (np.arange(n) + 0.5) * (2.0 / n)
    xs = centers[np.newaxis, :]          # column j
    ys = centers[::-1][:, np.newaxis]    # row i, top row at y ≈ 1
    return _to_vector(shepp_logan_value(xs, ys))


def grains_like(n: int, seed: int = 0) -> DenseVector:
    """Piecewise-constant Voronoi cells with values from a fixed palette."""
    _check_phantom_size(n)
    rng = np.random.default_rng(seed)
    n_cells = max(n // 4, 2)
    seeds = rng.uniform(0.0, n, size=(n_cells, 2))
    values = rng.choice(np.asarray(GRAINS_PALETTE), size=n_cells)
    ii, jj = np.meshgrid(np.arange(n) + 0.5, np.arange(n) + 0.5, indexing="ij")
    _, owner = cKDTree(seeds).query(np.column_stack([ii.ravel(), jj.ravel()]))
    return _to_vector(values[owner].reshape(n, n))


# ── Tomography ───────────────────────────────────────────────

@dataclass(frozen=True)
class TomoGeometry:
    """Parallel-beam geometry; ``detector_count`` defaults to n."""

    n: int
    angles: tuple[float, ...]
    detector_count: int | None = None
    spacing: float = 1.0

    def __post_init__(self):
        if self.detector_count is None:
            object.__setattr__(self, "detector_count", self.n)
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        if not self.angles:
            raise ConfigError("tomography geometry needs at least one angle")
        bad = [a for a in self.angles if not 0.0 <= a < 180.0]
        if bad:
            raise ConfigError(f"angles must lie in [0, 180), got {bad[:3]}")
        if self.detector_count < self.n:
            raise ConfigError(f"detector count {self.detector_count} < image size {self.n}")
        if self.spacing <= 0:
            raise ConfigError(f"detector spacing must be positive, got {self.spacing}")

    @property
    def n_rays(self) -> int:
        return len(self.angles) * self.detector_count

    def offsets(self) -> np.ndarray:
        d = self.detector_count
        return (np.arange(d) - (d - 1) / 2.0) * self.spacing


def _ray_segments(n: int, u: float, cos_t: float, sin_t: float):
    """Pixel columns and intersection lengths of one ray (Siddon traversal).

    The ray is u·(cos θ, sin θ) + t·(−sin θ, cos θ).
    """
    h = n / 2.0
    origin = (u * cos_t, u * sin_t)
    direction = (-sin_t, cos_t)
    t_lo, t_hi = -np.inf, np.inf
    crossings = []
    for o, dd in zip(origin, direction):
        if abs(dd) < _PARALLEL_EPS:
            if not -h < o < h:
                return None
            continue
        t1, t2 = (-h - o) / dd, (h - o) / dd
        t_lo, t_hi = max(t_lo, min(t1, t2)), min(t_hi, max(t1, t2))
        crossings.append((-h + np.arange(n + 1) - o) / dd)
    if not t_hi > t_lo:
        return None

    ts = np.concatenate([[t_lo, t_hi], *crossings])
    ts = np.unique(ts[(ts >= t_lo) & (ts <= t_hi)])
    lengths = np.diff(ts)
    mids = 0.5 * (ts[:-1] + ts[1:])
    keep = lengths > _MIN_SEGMENT
    lengths, mids = lengths[keep], mids[keep]
    px = origin[0] + mids * direction[0]
    py = origin[1] + mids * direction[1]
    j = np.clip(np.floor(px + h).astype(np.int64), 0, n - 1)
    i = np.clip(np.floor(h - py).astype(np.int64), 0, n - 1)
    return i + n * j, lengths


def tomo_matrix(g: TomoGeometry) -> SparseMatrix:
    """Ray/pixel intersection lengths; rows ordered angle-major, then detector."""
    rows, cols, vals = [], [], []
    offsets = g.offsets()
    for a, angle in enumerate(g.angles):
        theta = np.deg2rad(angle)
        cos_t, sin_t = np.cos(theta), np.sin(theta)
        for k, u in enumerate(offsets):
            seg = _ray_segments(g.n, float(u), cos_t, sin_t)
            if seg is None:
                continue
            c, ell = seg
            rows.append(np.full(c.size, a * g.detector_count + k))
            cols.append(c)
            vals.append(ell)
    if rows:
        A = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(g.n_rays, g.n * g.n),
        )
    else:
        A = sparse.zeros(g.n_rays, g.n * g.n)
    A = sparse.as_csr(A)
    log.debug("Tomography matrix %dx%d, nnz=%d", A.shape[0], A.shape[1], A.nnz)
    return A


# ── Blur ─────────────────────────────────────────────────────

@dataclass(frozen=True)
class BlurSpec:
    """Separable Gaussian blur of an m × n image (m rows, n columns)."""

    n: int
    m: int
    band1: int = 8
    band2: int = 7
    sigma1: float = field(default=0.0)
    sigma2: float = field(default=0.0)

    def __post_init__(self):
        if self.sigma1 == 0.0:
            object.__setattr__(self, "sigma1", 1.5 * self.n / 64)
        if self.sigma2 == 0.0:
            object.__setattr__(self, "sigma2", 1.25 * self.n / 64)
        if self.band1 < 1 or self.band2 < 1:
            raise ConfigError("blur bands must be >= 1")
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ConfigError("blur widths must be positive")
        if self.n < self.band1 or self.m < self.band2:
            raise ConfigError(
                f"image {self.m}x{self.n} is smaller than the blur bands ({self.band2}, {self.band1})"
            )


def blur_kernel(length: int, band: int, sigma: float) -> np.ndarray:
    """Gaussian samples for lags 0..band−1, zero-padded and normalized by 2·sum − 1."""
    z = np.zeros(length)
    k = np.arange(band)
    z[:band] = np.exp(-(k ** 2) / (2.0 * sigma ** 2))
    return z / (2.0 * z.sum() - 1.0)


def symmetric_toeplitz(z) -> SparseMatrix:
    """Banded symmetric Toeplitz matrix whose first column is ``z``."""
    z = np.asarray(z, dtype=np.float64)
    n = z.size
    lags = np.flatnonzero(z)
    offsets = sorted({int(s) * lag for lag in lags for s in (-1, 1)})
    diagonals = [np.full(n - abs(o), z[abs(o)]) for o in offsets]
    return sparse.as_csr(sp.diags(diagonals, offsets, shape=(n, n)))


def blur_matrix(spec: BlurSpec) -> SparseMatrix:
    A1 = symmetric_toeplitz(blur_kernel(spec.n, spec.band1, spec.sigma1))
    A2 = symmetric_toeplitz(blur_kernel(spec.m, spec.band2, spec.sigma2))
    return sparse.kron(A1, A2)


# ── Noise ────────────────────────────────────────────────────

def add_noise(b_true, level: float, seed: int = 0) -> DenseVector:
    """b_true + η with white Gaussian η scaled to ‖η‖ = level·‖b_true‖."""
    if level < 0:
        raise ConfigError(f"noise level must be >= 0, got {level}")
    b_true = sparse.as_vector(b_true, name="b_true")
    if level == 0:
        return b_true.copy()
    eta = np.random.default_rng(seed).standard_normal(b_true.size)
    eta *= level * np.linalg.norm(b_true) / np.linalg.norm(eta)
    return b_true + eta


# ── Problem registry ─────────────────────────────────────────

@dataclass
class Problem:
    A: SparseMatrix
    b: DenseVector
    x_true: DenseVector | None
    shape: tuple[int, int]
    b_true: DenseVector | None = None
    descriptor: dict = field(default_factory=dict)

    @property
    def n_pixels(self) -> int:
        return self.shape[0] * self.shape[1]

    def relative_error(self, x) -> float | None:
        if self.x_true is None:
            return None
        return float(np.linalg.norm(x - self.x_true) / np.linalg.norm(self.x_true))


PROBLEM_KINDS = ("tomo_full", "tomo_limited", "blur")


def build_problem(kind: str, n: int, noise: float = 0.01, seed: int = 0) -> Problem:
    """Assemble A, x_true and noisy b for one of :data:`PROBLEM_KINDS`."""
    descriptor = {"kind": kind, "n": n, "noise": noise, "seed": seed}
    if kind == "tomo_full":
        x_true = shepp_logan(n)
        geometry = TomoGeometry(n=n, angles=FULL_ANGLES)
        A = tomo_matrix(geometry)
        descriptor.update(phantom="shepp_logan", angles=[0, 1, 179],
                          detector_count=geometry.detector_count)
    elif kind == "tomo_limited":
        x_true = grains_like(n, seed)
        geometry = TomoGeometry(n=n, angles=LIMITED_ANGLES)
        A = tomo_matrix(geometry)
        descriptor.update(phantom="grains_like", angles=[0, 2, 130],
                          detector_count=geometry.detector_count)
    elif kind == "blur":
        x_true = grains_like(n, seed)
        spec = BlurSpec(n=n, m=n)
        A = blur_matrix(spec)
        descriptor.update(phantom="grains_like", band1=spec.band1, band2=spec.band2,
                          sigma1=spec.sigma1, sigma2=spec.sigma2)
    else:
        raise ConfigError(f"unknown problem kind {kind!r}; expected one of {PROBLEM_KINDS}")

    b_true = sparse.matvec(A, x_true)
    b = add_noise(b_true, noise, seed)
    log.info("Built %s problem: A %dx%d, nnz=%d, noise %.2g%%",
             kind, A.shape[0], A.shape[1], A.nnz, 100 * noise)
    return Problem(A=A, b=b, x_true=x_true, shape=(n, n), b_true=b_true, descriptor=descriptor)
