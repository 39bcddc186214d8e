"""Krylov solvers for the regularized normal equations.

``fgmres`` is the production solver (right-preconditioned, flexible, never
restarted). ``cg_normal`` is preconditioned CG on the normal operator; it
is the comparison baseline and also the relaxation engine inside the AMG
cycle. ``cgls`` solves the stacked least-squares form as a second baseline.
All three stop on the absolute 2-norm of the normal-equations residual.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from scipy.linalg import solve_triangular

from edgereg.sparse import DenseVector, as_vector

log = logging.getLogger(__name__)

LinearMap = Callable[[DenseVector], DenseVector]

DEFAULT_MAX_ITER = 300
REORTH_THRESHOLD = 0.7071
BREAKDOWN_RATIO = 1e-14

SOLVE_CSV_HEADER = ["outer_iter", "lambda", "iterations", "final_residual"]


@dataclass
class SolveReport:
    """Outcome of one linear solve."""

    iterations: int
    final_residual_norm: float
    residual_history: list[float] = field(default_factory=list)
    converged: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_row(self, outer_iter: int, lam: float) -> list:
        return [outer_iter, repr(float(lam)), self.iterations, repr(float(self.final_residual_norm))]


def write_solve_reports_csv(path: str | Path, rows: Iterable[tuple[int, float, SolveReport]]) -> Path:
    """Write (outer_iter, lambda, report) triples as CSV."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(SOLVE_CSV_HEADER)
        for outer_iter, lam, report in rows:
            writer.writerow(report.csv_row(outer_iter, lam))
    return path


# ── FGMRES ───────────────────────────────────────────────────

def fgmres(
    apply_normal: LinearMap,
    precond: LinearMap | None,
    b,
    x0=None,
    abs_tol: float = 1e-6,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[DenseVector, SolveReport]:
    """Flexible GMRES without restarts.

    One preconditioned vector z_j = precond(v_j) is stored per iteration so
    the preconditioner may change between iterations. Orthogonalization is
    modified Gram–Schmidt with a single reorthogonalization pass when the
    new vector lost most of its norm. Stops when the residual estimate
    drops to ``abs_tol`` (absolute), on breakdown, or after ``max_iter``.
    """
    if abs_tol <= 0:
        raise ValueError(f"abs_tol must be positive, got {abs_tol}")
    b = as_vector(b, name="b")
    n = b.size
    x = np.zeros(n) if x0 is None else as_vector(x0, n, name="x0").copy()
    precond = precond or (lambda v: v)

    r = b - apply_normal(x)
    beta = float(np.linalg.norm(r))
    history = [beta]
    if beta <= abs_tol:
        return x, SolveReport(iterations=0, final_residual_norm=beta,
                              residual_history=history, converged=True)

    breakdown_tol = BREAKDOWN_RATIO * max(float(np.linalg.norm(b)), np.finfo(float).tiny)
    V = [r / beta]
    Z: list[DenseVector] = []
    H = np.zeros((max_iter + 1, max_iter))
    cs = np.zeros(max_iter)
    sn = np.zeros(max_iter)
    g = np.zeros(max_iter + 1)
    g[0] = beta
    k = 0

    for j in range(max_iter):
        z = precond(V[j])
        w = apply_normal(z)
        w_norm = float(np.linalg.norm(w))
        for i in range(j + 1):
            H[i, j] = V[i] @ w
            w = w - H[i, j] * V[i]
        h_next = float(np.linalg.norm(w))
        if h_next < REORTH_THRESHOLD * w_norm:
            for i in range(j + 1):
                c = V[i] @ w
                H[i, j] += c
                w = w - c * V[i]
            h_next = float(np.linalg.norm(w))
        H[j + 1, j] = h_next

        for i in range(j):
            hi, hi1 = H[i, j], H[i + 1, j]
            H[i, j] = cs[i] * hi + sn[i] * hi1
            H[i + 1, j] = -sn[i] * hi + cs[i] * hi1
        denom = float(np.hypot(H[j, j], H[j + 1, j]))
        if denom == 0.0:
            log.warning("FGMRES: singular Hessenberg column at iteration %d", j + 1)
            break
        cs[j] = H[j, j] / denom
        sn[j] = H[j + 1, j] / denom
        H[j, j] = denom
        H[j + 1, j] = 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]

        Z.append(z)
        k = j + 1
        history.append(abs(float(g[j + 1])))
        if history[-1] <= abs_tol:
            break
        if h_next < breakdown_tol:
            log.debug("FGMRES: breakdown at iteration %d", k)
            break
        V.append(w / h_next)

    if k > 0:
        y = solve_triangular(H[:k, :k], g[:k])
        x = x + np.column_stack(Z) @ y

    final = float(np.linalg.norm(b - apply_normal(x)))
    history[-1] = final
    return x, SolveReport(iterations=k, final_residual_norm=final,
                          residual_history=history, converged=final <= abs_tol)


# ── CG on the normal equations ───────────────────────────────

def cg_normal(
    apply_normal: LinearMap,
    diag_precond,
    b,
    x0=None,
    abs_tol: float = 1e-6,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[DenseVector, SolveReport]:
    """Diagonally preconditioned CG.

    ``diag_precond`` is the diagonal being inverted (None for plain CG).
    ``abs_tol`` may be 0, in which case exactly ``max_iter`` iterations run
    unless the residual vanishes.
    """
    b = as_vector(b, name="b")
    n = b.size
    x = np.zeros(n) if x0 is None else as_vector(x0, n, name="x0").copy()
    inv_diag = None if diag_precond is None else 1.0 / as_vector(diag_precond, n, name="diagonal")

    r = b - apply_normal(x)
    r_norm = float(np.linalg.norm(r))
    history = [r_norm]
    it = 0
    if r_norm > abs_tol and r_norm > 0.0 and max_iter > 0:
        z = r if inv_diag is None else inv_diag * r
        p = z.copy()
        rz = float(r @ z)
        while it < max_iter:
            q = apply_normal(p)
            pq = float(p @ q)
            if pq <= 0.0:
                log.debug("CG: non-positive curvature %.3e at iteration %d", pq, it + 1)
                break
            alpha = rz / pq
            x = x + alpha * p
            r = r - alpha * q
            it += 1
            r_norm = float(np.linalg.norm(r))
            history.append(r_norm)
            if r_norm <= abs_tol or r_norm == 0.0:
                break
            z = r if inv_diag is None else inv_diag * r
            rz_new = float(r @ z)
            p = z + (rz_new / rz) * p
            rz = rz_new

    return x, SolveReport(iterations=it, final_residual_norm=r_norm,
                          residual_history=history, converged=r_norm <= abs_tol)


def cgls(system, x0=None, abs_tol: float = 1e-6,
         max_iter: int = DEFAULT_MAX_ITER) -> tuple[DenseVector, SolveReport]:
    """CGLS on the stacked system [A; λM] x ≈ [b; 0].

    ``system`` is a :class:`~edgereg.operators.RegularizedSystem`; the
    stopping test uses s = Aᵀ(b − Ax) − λ²MᵀMx, the normal residual.
    """
    A, M, lam = system.forward, system.weighted_gradient, system.lam
    n = system.n_unknowns
    x = np.zeros(n) if x0 is None else as_vector(x0, n, name="x0").copy()
    r_data = system.rhs - A.apply(x)
    r_reg = -lam * M.apply(x)
    s = A.apply_t(r_data) + lam * M.apply_t(r_reg)
    p = s.copy()
    gamma = float(s @ s)
    s_norm = float(np.sqrt(gamma))
    history = [s_norm]
    it = 0
    while s_norm > abs_tol and it < max_iter:
        q_data = A.apply(p)
        q_reg = lam * M.apply(p)
        qq = float(q_data @ q_data + q_reg @ q_reg)
        if qq == 0.0:
            break
        alpha = gamma / qq
        x = x + alpha * p
        r_data = r_data - alpha * q_data
        r_reg = r_reg - alpha * q_reg
        s = A.apply_t(r_data) + lam * M.apply_t(r_reg)
        gamma_new = float(s @ s)
        s_norm = float(np.sqrt(gamma_new))
        it += 1
        history.append(s_norm)
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
    return x, SolveReport(iterations=it, final_residual_norm=s_norm,
                          residual_history=history, converged=s_norm <= abs_tol)
