"""Discrete gradient, edge-weight state and the regularized normal operator.

Images are vectorized column-major (columns stacked), so ``I ⊗ L_v`` acts
within each image column and ``L_h ⊗ I`` across neighbouring columns.
Pixel (row i, column j) of an ``n_v × n_h`` image has index ``i + n_v·j``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from edgereg import sparse
from edgereg.errors import DegenerateWeightsError, DimensionError
from edgereg.sparse import DenseVector, Operator, SparseMatrix

log = logging.getLogger(__name__)

DEFAULT_Q = 2.0


def _first_difference(n: int) -> SparseMatrix:
    """(n−1) × n forward difference: row k has −1 at k and +1 at k+1."""
    return sparse.as_csr(sp.diags([-1.0, 1.0], [0, 1], shape=(n - 1, n)))


@dataclass(frozen=True)
class GradientOperator:
    """The stacked gradient L = [I ⊗ L_v ; L_h ⊗ I] of an n_v × n_h image."""

    n_v: int
    n_h: int
    op: Operator

    @property
    def matrix(self) -> SparseMatrix:
        return self.op.matrix

    @property
    def n_edges(self) -> int:
        return self.op.shape[0]

    @property
    def n_pixels(self) -> int:
        return self.n_v * self.n_h


def build_gradient(n_v: int, n_h: int) -> GradientOperator:
    if n_v < 2 or n_h < 2:
        raise DimensionError(f"gradient needs an image of at least 2x2, got {n_v}x{n_h}")
    vertical = sparse.kron(sparse.identity(n_h), _first_difference(n_v))
    horizontal = sparse.kron(_first_difference(n_h), sparse.identity(n_v))
    L = sparse.as_csr(sp.vstack([vertical, horizontal], format="csr"))
    return GradientOperator(n_v=n_v, n_h=n_h, op=Operator.of(L))


# ── Edge weights ─────────────────────────────────────────────

@dataclass(frozen=True)
class WeightState:
    """Cumulative diagonal of D^(ℓ) plus the latest factor d^(ℓ).

    ``cumulative`` holds diag(D^(ℓ)); ``d_current`` holds d^(ℓ), the factor
    applied by the most recent update (all ones at ℓ = 0).
    """

    cumulative: DenseVector
    d_current: DenseVector
    q_exponent: float = DEFAULT_Q
    ell: int = 0

    @classmethod
    def initial(cls, n_edges: int, q_exponent: float = DEFAULT_Q) -> WeightState:
        if q_exponent <= 0:
            raise ValueError(f"q exponent must be positive, got {q_exponent}")
        ones = np.ones(n_edges)
        return cls(cumulative=ones, d_current=ones.copy(), q_exponent=q_exponent, ell=0)

    def weighted_gradient(self, gradient: GradientOperator) -> SparseMatrix:
        """M^(ℓ) = D^(ℓ) L, materialized by row scaling."""
        return sparse.rowscale(self.cumulative, gradient.matrix)


def update_weights(state: WeightState, weighted_grad_of_solution) -> WeightState:
    """Apply d = 1 − (|v| / ‖v‖∞)^q to the cumulative weights.

    ``weighted_grad_of_solution`` is v = D^(ℓ−1) L x^(∗,ℓ−1).
    """
    v = sparse.as_vector(weighted_grad_of_solution, state.cumulative.size, name="weighted gradient")
    v_max = float(np.max(np.abs(v))) if v.size else 0.0
    if not np.isfinite(v_max):
        raise DegenerateWeightsError("weighted gradient contains non-finite entries")
    if v_max == 0.0:
        raise DegenerateWeightsError(
            "weighted gradient of the solution is identically zero; no edge information"
        )
    g = np.abs(v) / v_max
    d = np.clip(1.0 - g ** state.q_exponent, 0.0, 1.0)
    cumulative = d * state.cumulative
    log.debug(
        "Weights updated to l=%d: %d edges zeroed, mean weight %.4f",
        state.ell + 1, int(np.count_nonzero(cumulative == 0.0)), float(cumulative.mean()),
    )
    return WeightState(cumulative=cumulative, d_current=d, q_exponent=state.q_exponent, ell=state.ell + 1)


def weighted_gradient_of(state: WeightState, gradient: GradientOperator, x) -> DenseVector:
    """D^(ℓ) L x, the input to the next weight update."""
    return state.cumulative * gradient.op.apply(x)


# ── Regularized system ───────────────────────────────────────

@dataclass(frozen=True)
class RegularizedSystem:
    """min ‖Ax − b‖² + λ²‖Mx‖² with M = D^(ℓ) L."""

    forward: Operator
    weighted_gradient: Operator
    lam: float
    rhs: DenseVector

    def __post_init__(self):
        m, n = self.forward.shape
        if self.weighted_gradient.shape[1] != n:
            raise DimensionError(
                f"M has {self.weighted_gradient.shape[1]} columns, A has {n}"
            )
        if self.rhs.shape != (m,):
            raise DimensionError(f"b has shape {self.rhs.shape}, A has {m} rows")

    @classmethod
    def build(cls, forward: Operator, gradient: GradientOperator, weights: WeightState,
              lam: float, rhs) -> RegularizedSystem:
        M = Operator.of(weights.weighted_gradient(gradient))
        return cls(forward=forward, weighted_gradient=M, lam=float(lam),
                   rhs=sparse.as_vector(rhs, forward.shape[0], name="b"))

    @property
    def n_unknowns(self) -> int:
        return self.forward.shape[1]

    def with_lambda(self, lam: float) -> RegularizedSystem:
        return replace(self, lam=float(lam))

    def normal_rhs(self) -> DenseVector:
        """Aᵀb."""
        return self.forward.apply_t(self.rhs)

    def normal_apply(self, x) -> DenseVector:
        return normal_apply(self, x)

    def residual_norms(self, x) -> tuple[float, float]:
        return residual_norms(self, x)


def normal_apply(system: RegularizedSystem, x) -> DenseVector:
    """Aᵀ(Ax) + λ²Mᵀ(Mx), without forming AᵀA."""
    x = sparse.as_vector(x, system.n_unknowns, name="x")
    out = system.forward.apply_t(system.forward.apply(x))
    if system.lam != 0.0:
        M = system.weighted_gradient
        out += system.lam ** 2 * M.apply_t(M.apply(x))
    return out


def residual_norms(system: RegularizedSystem, x) -> tuple[float, float]:
    """(‖Ax − b‖₂, ‖Mx‖₂); logarithms are taken by the L-curve code."""
    x = sparse.as_vector(x, system.n_unknowns, name="x")
    data = float(np.linalg.norm(system.forward.apply(x) - system.rhs))
    constraint = float(np.linalg.norm(system.weighted_gradient.apply(x)))
    return data, constraint
