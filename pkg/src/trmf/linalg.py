"""Minimal dense linear-algebra kernel: SPD direct solve and matrix-free CG.

Every solver in the package funnels through these two entry points, which
keeps the numerical contracts (tolerances, error types) in one place.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .exceptions import DimensionMismatch, NonFiniteEncountered, NotSPD

SYMMETRY_TOL = 1e-10


@dataclass
class LinearOperator:
    """Matrix-free symmetric operator: ``apply`` maps R^dim -> R^dim."""

    dim: int
    apply: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def from_matrix(cls, a: np.ndarray) -> "LinearOperator":
        a = np.asarray(a, dtype=float)
        return cls(dim=a.shape[0], apply=lambda v: a @ v)


@dataclass
class CgResult:
    """Conjugate-gradient outcome: best iterate plus convergence diagnostics."""

    x: np.ndarray
    converged: bool
    iterations: int
    residual_norms: list[float] = field(default_factory=list)


def cholesky_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a @ x = b`` for symmetric positive definite ``a``.

    ``b`` may be a vector or a matrix of stacked right-hand sides.
    Raises NotSPD when ``a`` is asymmetric beyond 1e-10 or the
    factorization hits a non-positive pivot; DimensionMismatch on shape
    errors.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch(
            f"rhs length {b.shape[0]} does not match matrix dim {a.shape[0]}"
        )
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
    if float(np.max(np.abs(a - a.T))) > SYMMETRY_TOL * scale:
        raise NotSPD("matrix is not symmetric to tolerance 1e-10")
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotSPD(str(exc)) from exc
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def conjugate_gradient(
    op: LinearOperator,
    b: np.ndarray,
    x0: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int | None = None,
) -> CgResult:
    """Unpreconditioned conjugate gradients for an SPD operator.

    Runs until ||op(x) - b|| <= tol * ||b|| or ``max_iter`` applications,
    whichever comes first; the result carries a convergence flag and the
    recurrence residual norms. Symmetry/definiteness of ``op`` is the
    caller's contract. Raises NonFiniteEncountered if an iterate goes
    NaN/Inf.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = np.asarray(b, dtype=float)
    if b.shape != (op.dim,):
        raise DimensionMismatch(f"rhs shape {b.shape} does not match dim {op.dim}")
    if max_iter is None:
        max_iter = 10 * op.dim
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return CgResult(np.zeros(op.dim), True, 0, [0.0])

    x = np.zeros(op.dim) if x0 is None else np.array(x0, dtype=float)
    r = b - op.apply(x)
    rs = float(r @ r)
    norms = [np.sqrt(rs)]
    p = r.copy()
    n_iter = 0
    while n_iter < max_iter and norms[-1] > tol * b_norm:
        ap = op.apply(p)
        alpha = rs / float(p @ ap)
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = float(r @ r)
        if not np.isfinite(rs_new) or not np.isfinite(alpha):
            raise NonFiniteEncountered("conjugate gradient produced NaN/Inf")
        norms.append(np.sqrt(rs_new))
        p = r + (rs_new / rs) * p
        rs = rs_new
        n_iter += 1
    return CgResult(x, norms[-1] <= tol * b_norm, n_iter, norms)
