"""Compressed-row sparse matrices and the kernels the solvers share.

Matrices are ``scipy.sparse.csr_matrix`` instances kept in canonical form
(sorted column indices, no duplicate entries, float64 values). Vectors are
1-D float64 ``numpy`` arrays. Every kernel checks operand shapes and
raises :class:`~edgereg.errors.DimensionError` on mismatch.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from edgereg.errors import DimensionError

log = logging.getLogger(__name__)

SparseMatrix = sp.csr_matrix
DenseVector = np.ndarray

MATRIX_MARKET_HEADER = "%%MatrixMarket matrix coordinate real general"


def as_csr(m) -> SparseMatrix:
    """Return ``m`` as a canonical float64 CSR matrix (a copy)."""
    out = sp.csr_matrix(m, dtype=np.float64, copy=True)
    out.sum_duplicates()
    out.sort_indices()
    return out


def as_vector(v, length: int | None = None, name: str = "vector") -> DenseVector:
    """Coerce ``v`` to a 1-D float64 array, checking its length if given."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise DimensionError(f"{name} has length {arr.shape[0]}, expected {length}")
    return arr


# ── Constructors ─────────────────────────────────────────────

def identity(n: int) -> SparseMatrix:
    return as_csr(sp.identity(n, dtype=np.float64, format="csr"))


def zeros(n_rows: int, n_cols: int) -> SparseMatrix:
    return sp.csr_matrix((n_rows, n_cols), dtype=np.float64)


def from_dense(a) -> SparseMatrix:
    """Build a CSR matrix from a dense 2-D array, dropping exact zeros."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    return as_csr(sp.csr_matrix(a))


def diag_matrix(d) -> SparseMatrix:
    d = as_vector(d, name="diagonal")
    return as_csr(sp.diags(d, 0, shape=(d.size, d.size), format="csr"))


# ── Kernels ──────────────────────────────────────────────────

def matvec(m: SparseMatrix, v) -> DenseVector:
    """m @ v."""
    v = as_vector(v, m.shape[1], name="matvec operand")
    return np.asarray(m @ v, dtype=np.float64).ravel()


def matvec_transpose(m: SparseMatrix, v) -> DenseVector:
    """mᵀ @ v, computed as a scatter pass over the rows of ``m``."""
    v = as_vector(v, m.shape[0], name="matvec_transpose operand")
    return np.asarray(m.T @ v, dtype=np.float64).ravel()


def spgemm(a: SparseMatrix, b: SparseMatrix) -> SparseMatrix:
    """Sparse product a @ b with merged duplicates and sorted rows."""
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return as_csr(a @ b)


def kron(a: SparseMatrix, b: SparseMatrix) -> SparseMatrix:
    """Kronecker product: entry (ia·rb+ib, ja·cb+jb) = a[ia,ja]·b[ib,jb]."""
    return as_csr(sp.kron(a, b, format="csr"))


def transpose(m: SparseMatrix) -> SparseMatrix:
    return as_csr(m.T.tocsr())


def column_sumsq(m: SparseMatrix) -> DenseVector:
    """Σ_i m[i,j]² per column, i.e. diag(mᵀm)."""
    return np.asarray(m.multiply(m).sum(axis=0), dtype=np.float64).ravel()


def rowscale(d, m: SparseMatrix) -> SparseMatrix:
    """diag(d) @ m, formed by scaling the stored values row by row."""
    d = as_vector(d, m.shape[0], name="row scaling")
    out = as_csr(m)
    out.data *= np.repeat(d, np.diff(out.indptr))
    return out


def prune(m: SparseMatrix, eps: float = 0.0) -> SparseMatrix:
    """Drop stored entries with |value| <= eps. Not used on the solver path."""
    out = as_csr(m)
    out.data[np.abs(out.data) <= eps] = 0.0
    out.eliminate_zeros()
    return out


def frobenius_norm(m: SparseMatrix) -> float:
    return float(np.sqrt(np.sum(m.data * m.data)))


@dataclass(frozen=True)
class Operator:
    """A matrix paired with its cached transpose.

    Used for operators whose transpose is applied many times (the forward
    operator A and the gradient L).
    """

    matrix: SparseMatrix
    matrix_t: SparseMatrix

    @classmethod
    def of(cls, m) -> Operator:
        m = as_csr(m)
        return cls(matrix=m, matrix_t=transpose(m))

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def apply(self, v) -> DenseVector:
        return matvec(self.matrix, v)

    def apply_t(self, v) -> DenseVector:
        v = as_vector(v, self.matrix.shape[0], name="apply_t operand")
        return np.asarray(self.matrix_t @ v, dtype=np.float64).ravel()


# ── Matrix Market ────────────────────────────────────────────

def write_matrix_market(path: str | Path, m: SparseMatrix, comment: str = "") -> Path:
    """Write ``m`` in coordinate/real/general format with 1-based indices."""
    path = Path(path)
    coo = as_csr(m).tocoo()
    with open(path, "w", encoding="ascii") as f:
        f.write(MATRIX_MARKET_HEADER + "\n")
        for line in comment.splitlines():
            f.write(f"% {line}\n")
        f.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        entries = np.column_stack([coo.row + 1, coo.col + 1, coo.data])
        np.savetxt(f, entries, fmt=["%d", "%d", "%.17g"])
    log.debug("Wrote %s (%dx%d, nnz=%d)", path, coo.shape[0], coo.shape[1], coo.nnz)
    return path


def read_matrix_market(path: str | Path) -> SparseMatrix:
    """Read a coordinate-format Matrix Market file into canonical CSR."""
    return as_csr(scipy.io.mmread(str(path)))
