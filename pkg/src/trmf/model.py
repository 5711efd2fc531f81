"""Temporal regularized matrix factorization: objective and block solver.

The model approximates an n x T series matrix Y on its observed entries by
F @ X with F (n x k) series factors and X (k x T) latent series, while each
row of X is pushed toward an autoregressive law with per-row diagonal lag
weights. Fitting alternates three exact-or-descending block updates:

  * F update - independent ridge regressions, one per series;
  * X update - one joint conjugate-gradient solve of the k*T system whose
    Hessian is the data term plus per-row AR-penalty Hessians (rows couple
    only through the data term because lag weights are diagonal);
  * weight update - independent small ridge regressions, one per latent row.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DegenerateRidge,
    DimensionMismatch,
    EmptyMask,
    NotSPD,
    SeriesTooShort,
)
from .linalg import LinearOperator, cholesky_solve, conjugate_gradient
from .temporal import LagSet, LagWeights, ar_reg_value


@dataclass(eq=False)
class ObservedSeries:
    """Series matrix (rows = series, columns = time) with an observation mask.

    Values at unobserved positions are zeroed on construction so they can
    never leak into a fit.
    """

    values: np.ndarray
    mask: np.ndarray
    ids: list[str] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.values.ndim != 2 or self.mask.shape != self.values.shape:
            raise DimensionMismatch(
                f"values {self.values.shape} and mask {self.mask.shape} must be "
                "matching 2-D arrays"
            )
        if not self.mask.any():
            raise EmptyMask("observation mask is empty")
        if not np.isfinite(self.values[self.mask]).all():
            raise ValueError("observed entries must be finite")
        self.values = np.where(self.mask, self.values, 0.0)
        if self.ids is not None and len(self.ids) != self.values.shape[0]:
            raise DimensionMismatch("one id per series required")

    @classmethod
    def from_dense(cls, values: np.ndarray, ids: list[str] | None = None) -> "ObservedSeries":
        """Build from a dense array where NaN marks unobserved entries."""
        values = np.asarray(values, dtype=float)
        return cls(values=np.nan_to_num(values, nan=0.0), mask=~np.isnan(values), ids=ids)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def t_count(self) -> int:
        return self.values.shape[1]

    @property
    def observed_count(self) -> int:
        return int(self.mask.sum())

    def fully_observed(self) -> bool:
        return bool(self.mask.all())


@dataclass(frozen=True)
class Hyperparams:
    k: int
    lambda_f: float = 0.5
    lambda_x: float = 0.5
    lambda_w: float = 0.5
    eta: float = 1.0
    max_outer_iters: int = 40
    rel_tol: float = 1e-4
    cg_tol: float = 1e-8
    cg_max_iter: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("latent rank k must be >= 1")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if min(self.lambda_f, self.lambda_x, self.lambda_w) < 0:
            raise ValueError("regularization strengths must be nonnegative")


@dataclass(eq=False)
class ARWeights:
    """Per-latent-row lag weights; row r holds the diagonal weights of row r."""

    lag_set: LagSet
    w: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if self.w.ndim != 2 or self.w.shape[1] != len(self.lag_set):
            raise DimensionMismatch(
                f"weights shape {self.w.shape} does not match |lags|={len(self.lag_set)}"
            )

    @classmethod
    def zeros(cls, k: int, lag_set: LagSet) -> "ARWeights":
        return cls(lag_set, np.zeros((k, len(lag_set))))

    @classmethod
    def constant(cls, k: int, lag_set: LagSet, value: float) -> "ARWeights":
        return cls(lag_set, np.full((k, len(lag_set)), float(value)))

    @property
    def k(self) -> int:
        return self.w.shape[0]

    def row(self, r: int) -> LagWeights:
        return LagWeights(self.lag_set, self.w[r])


@dataclass(eq=False)
class TrmfModel:
    f_mat: np.ndarray
    x_mat: np.ndarray
    ar: ARWeights
    hyper: Hyperparams
    fit_trace: list[tuple[int, float]] = field(default_factory=list)

    def __post_init__(self):
        self.f_mat = np.asarray(self.f_mat, dtype=float)
        self.x_mat = np.asarray(self.x_mat, dtype=float)
        k = self.f_mat.shape[1]
        if self.x_mat.shape[0] != k or self.ar.k != k:
            raise DimensionMismatch("factor, latent and weight ranks disagree")

    @property
    def n(self) -> int:
        return self.f_mat.shape[0]

    @property
    def k(self) -> int:
        return self.f_mat.shape[1]

    @property
    def t_count(self) -> int:
        return self.x_mat.shape[1]


def objective(data: ObservedSeries, model: TrmfModel) -> float:
    """Full objective: masked squared error + ridge on F, AR penalty on X
    rows (scaled by lambda_x), ridge on the lag weights."""
    if model.n != data.n or model.t_count != data.t_count:
        raise DimensionMismatch("model dimensions do not match the data")
    h = model.hyper
    resid = np.where(data.mask, data.values - model.f_mat @ model.x_mat, 0.0)
    total = float(np.sum(resid * resid))
    total += h.lambda_f * float(np.sum(model.f_mat * model.f_mat))
    if h.lambda_x != 0.0:
        for r in range(model.k):
            total += h.lambda_x * ar_reg_value(
                model.x_mat[r], model.ar.lag_set, model.ar.row(r), h.eta
            )
    total += h.lambda_w * float(np.sum(model.ar.w * model.ar.w))
    return total


def update_f(data: ObservedSeries, x_mat: np.ndarray, lambda_f: float) -> np.ndarray:
    """Exact per-series ridge update of the factor matrix F.

    Rows with no observations shrink to zero. With lambda_f = 0 and a
    rank-deficient design the row falls back to the minimum-norm least
    squares solution.
    """
    x_mat = np.asarray(x_mat, dtype=float)
    k, t_count = x_mat.shape
    if t_count != data.t_count:
        raise DimensionMismatch("latent series length does not match the data")
    eye = np.eye(k)
    if data.fully_observed():
        # shared Gram matrix: one factorization for all series
        gram = x_mat @ x_mat.T + lambda_f * eye
        try:
            return cholesky_solve(gram, x_mat @ data.values.T).T
        except NotSPD:
            pass
    f_new = np.zeros((data.n, k))
    for i in range(data.n):
        cols = data.mask[i]
        if not cols.any():
            continue
        x_obs = x_mat[:, cols]
        y_obs = data.values[i, cols]
        gram = x_obs @ x_obs.T + lambda_f * eye
        rhs = x_obs @ y_obs
        try:
            f_new[i] = cholesky_solve(gram, rhs)
        except NotSPD:
            if lambda_f > 0:
                raise
            f_new[i] = np.linalg.lstsq(x_obs.T, y_obs, rcond=None)[0]
    return f_new


def _x_system(
    data: ObservedSeries,
    f_mat: np.ndarray,
    ar: ARWeights,
    lambda_x: float,
    eta: float,
):
    """Operator and right-hand side of the stationarity system for X.

    Solves (B + lambda_x/2 * H) X = F' (mask * Y) where B applies the masked
    data term column-wise and H stacks the per-row AR-penalty Hessians.
    """
    k, t_count = ar.k, data.t_count
    lags = ar.lag_set.lags
    l_max = ar.lag_set.l_max
    w = ar.w
    mask = data.mask

    def apply(v: np.ndarray) -> np.ndarray:
        x = v.reshape(k, t_count)
        out = f_mat.T @ (mask * (f_mat @ x))
        resid = x[:, l_max:].copy()
        for j, l in enumerate(lags):
            resid -= w[:, j : j + 1] * x[:, l_max - l : t_count - l]
        reg = eta * x
        reg[:, l_max:] += resid
        for j, l in enumerate(lags):
            reg[:, l_max - l : t_count - l] -= w[:, j : j + 1] * resid
        out += 0.5 * lambda_x * reg
        return out.ravel()

    rhs = (f_mat.T @ data.values).ravel()
    return LinearOperator(k * t_count, apply), rhs


def update_x(
    data: ObservedSeries,
    f_mat: np.ndarray,
    ar: ARWeights,
    lambda_x: float,
    eta: float,
    x_init: np.ndarray,
    cg_tol: float,
    cg_max_iter: int,
) -> np.ndarray:
    """Joint CG update of all latent series, warm-started at ``x_init``.

    Unobserved columns are still pinned down through the temporal penalty;
    that coupling is what makes imputation and forecasting work, so there is
    deliberately no special casing for them.
    """
    f_mat = np.asarray(f_mat, dtype=float)
    x_init = np.asarray(x_init, dtype=float)
    k, t_count = x_init.shape
    if f_mat.shape != (data.n, k) or t_count != data.t_count:
        raise DimensionMismatch("factor/latent shapes do not match the data")
    if t_count < ar.lag_set.m:
        raise SeriesTooShort(
            f"need at least {ar.lag_set.m} time points, got {t_count}"
        )
    op, rhs = _x_system(data, f_mat, ar, lambda_x, eta)
    result = conjugate_gradient(
        op, rhs, x0=x_init.ravel(), tol=cg_tol, max_iter=cg_max_iter
    )
    return result.x.reshape(k, t_count)


def update_w(
    x_mat: np.ndarray, lag_set: LagSet, lambda_x: float, lambda_w: float
) -> ARWeights:
    """Exact per-row ridge estimate of the lag weights given X.

    Each latent row is a small regression of x_t on its lagged values with
    ridge strength lambda_w / lambda_x. A zero lambda_x makes the weight
    term the whole objective, so the minimizer is identically zero.
    """
    x_mat = np.asarray(x_mat, dtype=float)
    k, t_count = x_mat.shape
    l_max = lag_set.l_max
    if t_count < lag_set.m:
        raise SeriesTooShort(f"need at least {lag_set.m} time points, got {t_count}")
    if lambda_x == 0.0:
        return ARWeights.zeros(k, lag_set)
    ratio = lambda_w / lambda_x
    w = np.zeros((k, len(lag_set)))
    eye = np.eye(len(lag_set))
    for r in range(k):
        x = x_mat[r]
        design = np.column_stack([x[l_max - l : t_count - l] for l in lag_set.lags])
        target = x[l_max:]
        gram = design.T @ design + ratio * eye
        rhs = design.T @ target
        try:
            w[r] = cholesky_solve(gram, rhs)
        except NotSPD as exc:
            raise DegenerateRidge(
                f"lagged design for latent row {r} is rank deficient and "
                "lambda_w is zero"
            ) from exc
    return ARWeights(lag_set, w)


def fit(
    data: ObservedSeries,
    hyper: Hyperparams,
    lag_set: LagSet,
    fixed_weights: ARWeights | None = None,
) -> TrmfModel:
    """Alternating minimization until the relative objective change stalls.

    ``fixed_weights`` pins the lag weights and skips their update; the chain
    baseline and the plain-ridge factorization are exactly this solver under
    pinned constant weights.
    """
    if data.t_count < lag_set.m:
        raise SeriesTooShort(
            f"need at least {lag_set.m} time points, got {data.t_count}"
        )
    rng = np.random.default_rng(hyper.seed)
    f_mat = 0.1 * rng.standard_normal((data.n, hyper.k))
    x_mat = 0.1 * rng.standard_normal((hyper.k, data.t_count))
    if fixed_weights is None:
        ar = ARWeights.zeros(hyper.k, lag_set)
    else:
        if fixed_weights.k != hyper.k or fixed_weights.lag_set != lag_set:
            raise DimensionMismatch("fixed weights do not match k and the lag set")
        ar = fixed_weights

    model = TrmfModel(f_mat, x_mat, ar, hyper)
    prev = objective(data, model)
    trace = [(0, prev)]
    for it in range(1, hyper.max_outer_iters + 1):
        f_mat = update_f(data, x_mat, hyper.lambda_f)
        x_mat = update_x(
            data,
            f_mat,
            ar,
            hyper.lambda_x,
            hyper.eta,
            x_mat,
            hyper.cg_tol,
            hyper.cg_max_iter,
        )
        if fixed_weights is None:
            ar = update_w(x_mat, lag_set, hyper.lambda_x, hyper.lambda_w)
        model = TrmfModel(f_mat, x_mat, ar, hyper)
        current = objective(data, model)
        trace.append((it, current))
        if abs(prev - current) / (1.0 + abs(current)) < hyper.rel_tol:
            prev = current
            break
        prev = current
    model.fit_trace = trace
    return model


def naive_graph_weights(
    x_mat: np.ndarray, lag_set: LagSet, constraint: str
) -> np.ndarray:
    """Minimizer of the fixed-weight chain objective over the lag weights.

    This exists to demonstrate why plugging learnable nonnegative weights
    straight into a graph regularizer fails: under ``nonneg`` the optimum is
    all zeros, under ``simplex`` it is the 1-sparse indicator of the lag
    with the smallest aggregate difference (ties -> smallest lag).
    """
    x_mat = np.asarray(x_mat, dtype=float)
    t_count = x_mat.shape[1]
    if t_count <= lag_set.l_max:
        raise SeriesTooShort(
            f"need more than {lag_set.l_max} time points, got {t_count}"
        )
    if constraint == "nonneg":
        return np.zeros(len(lag_set))
    if constraint == "simplex":
        costs = np.array(
            [
                float(np.sum((x_mat[:, l:] - x_mat[:, : t_count - l]) ** 2))
                for l in lag_set.lags
            ]
        )
        out = np.zeros(len(lag_set))
        out[int(np.argmin(costs))] = 1.0
        return out
    raise ValueError(f"unknown constraint {constraint!r}")
