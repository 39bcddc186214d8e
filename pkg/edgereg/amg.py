"""Classical AMG for the regularized normal equations.

The hierarchy is built from the diffusion term K = MᵀM = Lᵀ(D^(ℓ))²L
only: strength of connection, a two-pass Ruge–Stüben C/F splitting and
classical interpolation are all evaluated on K and its Galerkin
coarsenings. Alongside, the one-sided operators A_k = A_{k−1}P_k and
M_k = M_{k−1}P_k are stored, so the Galerkin coarsening of
AᵀA + λ²MᵀM is applied at any level as A_kᵀ(A_k v) + λ²M_kᵀ(M_k v)
without ever forming AᵀA. Nothing in the hierarchy depends on λ except
the cache of coarsest-level Cholesky factors.

Relaxation is diagonally preconditioned CG, restarted on each call.
"""
from __future__ import annotations

import heapq
import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from edgereg import sparse
from edgereg.errors import (
    DimensionError,
    InterpolationError,
    PreconditionerError,
    SplittingError,
)
from edgereg.krylov import cg_normal
from edgereg.sparse import DenseVector, SparseMatrix

log = logging.getLogger(__name__)

DEFAULT_THETA = 0.25
DEFAULT_MAX_COARSE = 200
DEFAULT_COARSEN_STALL = 0.9
CYCLE_GAMMA = 1  # V-cycles only
SEMIDEFINITE_SHIFT = 1e-12

F_POINT = 0
C_POINT = 1


# ── Strength of connection ───────────────────────────────────

@dataclass(frozen=True)
class StrengthGraph:
    """Strong dependencies: S[i, j] != 0 iff i depends strongly on j."""

    n: int
    matrix: SparseMatrix

    def neighbors(self, i: int) -> np.ndarray:
        return self.matrix.indices[self.matrix.indptr[i]:self.matrix.indptr[i + 1]]

    @property
    def strong_neighbors(self) -> list[np.ndarray]:
        return [self.neighbors(i) for i in range(self.n)]

    def transpose(self) -> StrengthGraph:
        return StrengthGraph(n=self.n, matrix=sparse.transpose(self.matrix))


def strength_filter(k: SparseMatrix, theta: float = DEFAULT_THETA) -> StrengthGraph:
    """Keep j ≠ i with −k_ij > θ·max_{m≠i}(−k_im)."""
    if k.shape[0] != k.shape[1]:
        raise DimensionError(f"strength filter needs a square matrix, got {k.shape}")
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    k = sparse.as_csr(k)
    n = k.shape[0]
    rows = np.repeat(np.arange(n), np.diff(k.indptr))
    off = (k.indices != rows) & (k.data != 0.0)
    row_max = np.full(n, -np.inf)
    np.maximum.at(row_max, rows[off], -k.data[off])
    threshold = theta * row_max[rows]
    strong = off & (row_max[rows] > 0.0) & (-k.data > threshold)
    S = sp.csr_matrix(
        (np.ones(int(strong.sum())), (rows[strong], k.indices[strong])), shape=(n, n)
    )
    return StrengthGraph(n=n, matrix=sparse.as_csr(S))


# ── C/F splitting ────────────────────────────────────────────

@dataclass(frozen=True)
class CfSplitting:
    labels: np.ndarray        # C_POINT / F_POINT per point
    coarse_index: np.ndarray  # 0..n_c−1 for C-points, −1 for F-points

    @classmethod
    def from_labels(cls, labels) -> CfSplitting:
        labels = np.asarray(labels, dtype=np.int8)
        is_c = labels == C_POINT
        coarse_index = np.full(labels.size, -1, dtype=np.int64)
        coarse_index[is_c] = np.arange(int(is_c.sum()))
        return cls(labels=labels, coarse_index=coarse_index)

    @property
    def is_coarse(self) -> np.ndarray:
        return self.labels == C_POINT

    @property
    def n_coarse(self) -> int:
        return int(np.count_nonzero(self.labels == C_POINT))


def cf_split(g: StrengthGraph) -> CfSplitting:
    """Two-pass Ruge–Stüben splitting.

    Pass one is the greedy maximal independent set: the unassigned point of
    largest measure (ties to the lowest index) becomes C, the unassigned
    points depending on it become F, and the unassigned points those new
    F-points depend on gain one unit of measure. Points with no strong
    connection in either direction are made C (injected). Pass two walks
    the F-points in order and, for every strongly connected F-pair (i, m)
    without a common strong C-point, promotes the later-indexed one to C.
    """
    n = g.n
    S = g.matrix
    St = sparse.transpose(S)
    unassigned = -1
    labels = np.full(n, unassigned, dtype=np.int8)

    out_deg = np.diff(S.indptr)
    measure = np.diff(St.indptr).astype(np.int64)
    isolated = (out_deg == 0) & (measure == 0)
    labels[isolated] = C_POINT

    heap = [(-int(measure[i]), i) for i in range(n) if labels[i] == unassigned and measure[i] > 0]
    heapq.heapify(heap)
    while heap:
        neg_m, i = heapq.heappop(heap)
        if labels[i] != unassigned or -neg_m != measure[i]:
            continue
        labels[i] = C_POINT
        for j in St.indices[St.indptr[i]:St.indptr[i + 1]]:
            if labels[j] != unassigned:
                continue
            labels[j] = F_POINT
            for kk in S.indices[S.indptr[j]:S.indptr[j + 1]]:
                if labels[kk] == unassigned:
                    measure[kk] += 1
                    heapq.heappush(heap, (-int(measure[kk]), int(kk)))
    labels[labels == unassigned] = F_POINT

    for i in range(n):
        if labels[i] != F_POINT:
            continue
        s_i = S.indices[S.indptr[i]:S.indptr[i + 1]]
        if s_i.size == 0:
            labels[i] = C_POINT
            continue
        c_i = set(s_i[labels[s_i] == C_POINT].tolist())
        if not c_i:
            labels[i] = C_POINT
            continue
        for m in s_i:
            if labels[m] != F_POINT:
                continue
            s_m = S.indices[S.indptr[m]:S.indptr[m + 1]]
            if c_i.isdisjoint(s_m.tolist()):
                if m > i:
                    labels[m] = C_POINT
                    c_i.add(int(m))
                else:
                    labels[i] = C_POINT
                    break

    split = CfSplitting.from_labels(labels)
    log.debug("C/F split: %d of %d points coarse", split.n_coarse, n)
    return split


# ── Interpolation ────────────────────────────────────────────

def build_interpolation(k: SparseMatrix, g: StrengthGraph, split: CfSplitting) -> SparseMatrix:
    """Classical (Ruge–Stüben) interpolation P of shape n × n_c.

    For F-point i with strong C-neighbours C_i, strong F-neighbours F_i^s
    and remaining (weak) neighbours F_i^w:

        w_ij = −(k_ij + Σ_{m∈F_i^s} k_im k_mj / Σ_{l∈C_i} k_ml) / (k_ii + Σ_{m∈F_i^w} k_im)
    """
    k = sparse.as_csr(k)
    n = k.shape[0]
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []

    def row_dict(i: int) -> dict[int, float]:
        lo, hi = k.indptr[i], k.indptr[i + 1]
        return dict(zip(k.indices[lo:hi].tolist(), k.data[lo:hi].tolist()))

    for i in range(n):
        if split.labels[i] == C_POINT:
            rows.append(i)
            cols.append(int(split.coarse_index[i]))
            vals.append(1.0)
            continue
        strong = g.neighbors(i)
        c_i = [int(j) for j in strong if split.labels[j] == C_POINT]
        if not c_i:
            raise SplittingError(f"F-point {i} has no strongly connected C-point")
        f_strong = [int(m) for m in strong if split.labels[m] == F_POINT]
        k_i = row_dict(i)
        k_ii = k_i.get(i, 0.0)
        interp_set = set(c_i) | set(f_strong)
        denom = k_ii + sum(v for m, v in k_i.items() if m != i and m not in interp_set)
        if denom == 0.0:
            raise InterpolationError(f"zero diagonal term for F-point {i}")

        numer = {j: k_i.get(j, 0.0) for j in c_i}
        for m in f_strong:
            k_m = row_dict(m)
            inner = sum(k_m.get(l, 0.0) for l in c_i)
            if inner == 0.0:
                raise InterpolationError(
                    f"F-point {i}: strong F-neighbour {m} has zero coupling sum to C_i"
                )
            k_im = k_i.get(m, 0.0)
            for j in c_i:
                numer[j] += k_im * k_m.get(j, 0.0) / inner
        for j in c_i:
            rows.append(i)
            cols.append(int(split.coarse_index[j]))
            vals.append(-numer[j] / denom)

    P = sp.csr_matrix((vals, (rows, cols)), shape=(n, split.n_coarse))
    return sparse.as_csr(P)


# ── Hierarchy ────────────────────────────────────────────────

@dataclass(frozen=True)
class AmgLevel:
    """One level: its operators and the interpolation to the next level.

    ``P`` is None on the coarsest level.
    """

    K_diff: SparseMatrix
    A_k: SparseMatrix
    M_k: SparseMatrix
    diag_AtA: DenseVector
    diag_MtM: DenseVector
    P: SparseMatrix | None = None

    @property
    def size(self) -> int:
        return self.K_diff.shape[0]

    def normal_apply(self, lam: float, v) -> DenseVector:
        """A_kᵀ(A_k v) + λ² M_kᵀ(M_k v)."""
        out = sparse.matvec_transpose(self.A_k, sparse.matvec(self.A_k, v))
        if lam != 0.0:
            out += lam ** 2 * sparse.matvec_transpose(self.M_k, sparse.matvec(self.M_k, v))
        return out

    def relaxation_diagonal(self, lam: float) -> DenseVector:
        return self.diag_AtA + lam ** 2 * self.diag_MtM


@dataclass
class AmgHierarchy:
    """Levels fine to coarse; ``levels[-1]`` is the coarsest (no P)."""

    levels: list[AmgLevel]
    coarsest_AtA: np.ndarray = field(repr=False)
    coarsest_MtM: np.ndarray = field(repr=False)
    _factors: dict[float, tuple] = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def coarsest(self) -> AmgLevel:
        return self.levels[-1]

    @property
    def coarsest_dim(self) -> int:
        return self.coarsest.size

    @property
    def coarsest_A(self) -> SparseMatrix:
        return self.coarsest.A_k

    @property
    def coarsest_M(self) -> SparseMatrix:
        return self.coarsest.M_k

    def level_normal_apply(self, k: int, lam: float, v) -> DenseVector:
        return self.levels[k].normal_apply(lam, v)

    def coarse_factor(self, lam: float):
        """Cholesky factor of the dense coarsest normal matrix for λ (cached)."""
        key = float(lam)
        with self._lock:
            cached = self._factors.get(key)
        if cached is not None:
            return cached
        G = self.coarsest_AtA + key ** 2 * self.coarsest_MtM
        try:
            factor = cho_factor(G, lower=True, check_finite=False)
        except LinAlgError:
            n = G.shape[0]
            shift = SEMIDEFINITE_SHIFT * (np.trace(G) / n if np.trace(G) > 0 else 1.0)
            log.warning("Coarsest matrix (n=%d, lambda=%.3e) is semidefinite; shifting by %.2e",
                        n, key, shift)
            try:
                factor = cho_factor(G + shift * np.eye(n), lower=True, check_finite=False)
            except LinAlgError as e:
                raise PreconditionerError(f"coarsest matrix cannot be factorized: {e}") from e
        with self._lock:
            self._factors.setdefault(key, factor)
        return factor

    def coarse_solve(self, lam: float, b) -> DenseVector:
        return cho_solve(self.coarse_factor(lam), np.asarray(b, dtype=np.float64), check_finite=False)

    def preconditioner(self, lam: float, nu1: int = 2, nu2: int = 1) -> Callable[[DenseVector], DenseVector]:
        """r ↦ one V(nu1, nu2) cycle on the fine level from a zero guess."""
        n = self.levels[0].size

        def apply(r: DenseVector) -> DenseVector:
            return vcycle(self, lam, np.zeros(n), r, nu1, nu2)

        return apply

    def summary(self) -> dict:
        """Per-level sizes and nnz plus grid and operator complexity."""
        levels = []
        for k, lvl in enumerate(self.levels):
            levels.append({
                "level": k,
                "n": lvl.size,
                "nnz_K": int(lvl.K_diff.nnz),
                "nnz_A": int(lvl.A_k.nnz),
                "nnz_M": int(lvl.M_k.nnz),
                "nnz_P": int(lvl.P.nnz) if lvl.P is not None else 0,
            })
        n_fine = levels[0]["n"]
        nnz_fine = levels[0]["nnz_K"]
        return {
            "n_levels": self.n_levels,
            "coarsest_dim": self.coarsest_dim,
            "grid_complexity": sum(l["n"] for l in levels) / n_fine,
            "operator_complexity": sum(l["nnz_K"] for l in levels) / max(nnz_fine, 1),
            "levels": levels,
        }


def write_hierarchy_json(path: str | Path, hierarchy: AmgHierarchy) -> Path:
    path = Path(path)
    path.write_text(json.dumps(hierarchy.summary(), indent=2), encoding="utf-8")
    return path


def _make_level(K: SparseMatrix, A_k: SparseMatrix, M_k: SparseMatrix,
                P: SparseMatrix | None = None) -> AmgLevel:
    return AmgLevel(
        K_diff=K,
        A_k=A_k,
        M_k=M_k,
        diag_AtA=sparse.column_sumsq(A_k),
        diag_MtM=np.asarray(K.diagonal(), dtype=np.float64),
        P=P,
    )


def setup_hierarchy(
    A: SparseMatrix,
    M: SparseMatrix,
    theta: float = DEFAULT_THETA,
    max_coarse: int = DEFAULT_MAX_COARSE,
    coarsen_stall: float = DEFAULT_COARSEN_STALL,
) -> AmgHierarchy:
    """Build the λ-free hierarchy for one outer iteration."""
    A_k = sparse.as_csr(A)
    M_k = sparse.as_csr(M)
    if A_k.shape[1] != M_k.shape[1]:
        raise DimensionError(f"A has {A_k.shape[1]} columns, M has {M_k.shape[1]}")
    K = sparse.spgemm(sparse.transpose(M_k), M_k)

    levels: list[AmgLevel] = []
    while K.shape[0] > max_coarse:
        n = K.shape[0]
        graph = strength_filter(K, theta)
        split = cf_split(graph)
        n_c = split.n_coarse
        if n_c == 0 or n_c / n > coarsen_stall:
            log.warning("Coarsening stalled at level %d (%d -> %d); coarsest level keeps %d "
                        "unknowns (max_coarse=%d) for the dense solve",
                        len(levels), n, n_c, n, max_coarse)
            break
        P = build_interpolation(K, graph, split)
        levels.append(_make_level(K, A_k, M_k, P))
        K = sparse.spgemm(sparse.transpose(P), sparse.spgemm(K, P))
        A_k = sparse.spgemm(A_k, P)
        M_k = sparse.spgemm(M_k, P)

    levels.append(_make_level(K, A_k, M_k))
    hierarchy = AmgHierarchy(
        levels=levels,
        coarsest_AtA=(A_k.T @ A_k).toarray(),
        coarsest_MtM=(M_k.T @ M_k).toarray(),
    )
    log.info("AMG hierarchy: %d levels, sizes %s",
             hierarchy.n_levels, [lvl.size for lvl in hierarchy.levels])
    return hierarchy


# ── Solve phase ──────────────────────────────────────────────

def cg_relax(level: AmgLevel, lam: float, x, b, sweeps: int) -> DenseVector:
    """``sweeps`` iterations of diagonally preconditioned CG on one level."""
    if sweeps < 0:
        raise ValueError(f"sweeps must be >= 0, got {sweeps}")
    x = sparse.as_vector(x, level.size, name="x")
    if sweeps == 0:
        return x
    diag = level.relaxation_diagonal(lam)
    if np.any(diag == 0.0):
        raise PreconditionerError(
            f"relaxation diagonal has {int(np.count_nonzero(diag == 0.0))} zero entries"
        )
    x, _ = cg_normal(lambda v: level.normal_apply(lam, v), diag, b, x0=x,
                     abs_tol=0.0, max_iter=sweeps)
    return x


def vcycle(h: AmgHierarchy, lam: float, x, b, nu1: int = 2, nu2: int = 1) -> DenseVector:
    """One V(nu1, nu2) cycle on the fine-level normal equations."""
    b = sparse.as_vector(b, h.levels[0].size, name="b")
    x = sparse.as_vector(x, h.levels[0].size, name="x")
    return _cycle(h, 0, lam, x, b, nu1, nu2)


def _cycle(h: AmgHierarchy, k: int, lam: float, x: DenseVector, b: DenseVector,
           nu1: int, nu2: int) -> DenseVector:
    if k == h.n_levels - 1:
        return h.coarse_solve(lam, b)
    level = h.levels[k]
    x = cg_relax(level, lam, x, b, nu1)
    r = b - level.normal_apply(lam, x)
    r_coarse = sparse.matvec_transpose(level.P, r)
    e_coarse = np.zeros(level.P.shape[1])
    for _ in range(CYCLE_GAMMA):
        e_coarse = _cycle(h, k + 1, lam, e_coarse, r_coarse, nu1, nu2)
    x = x + sparse.matvec(level.P, e_coarse)
    return cg_relax(level, lam, x, b, nu2)
