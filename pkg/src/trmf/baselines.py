"""Comparison methods: observed mean, full AR(1), SVD + latent AR(1), and
the chain-graph factorization (temporal regularizer with lag 1, unit weight).

The chain baseline is not separate code: it is the main solver with pinned
weights, which a construction test enforces. The unregularized-dynamics
variant ("plain" factorization, zero pinned weights) is likewise just a
configuration and lives in the benchmark harness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    DegenerateRidge,
    EmptyMask,
    MissingValuesUnsupported,
    NotSPD,
    TrmfError,
)
from .forecast import forecast_series, impute
from .linalg import cholesky_solve
from .model import ARWeights, Hyperparams, ObservedSeries, TrmfModel, fit
from .temporal import LagSet

CHAIN_LAGS = LagSet((1,))


@dataclass(eq=False)
class BaselineModel:
    kind: str  # mean | ar1 | svd_ar1 | tcf
    n: int
    t_count: int
    mean_value: float | None = None
    transition: np.ndarray | None = None  # ar1: n x n, svd_ar1: k x k
    f_mat: np.ndarray | None = None  # svd_ar1 loadings (U_k S_k)
    x_mat: np.ndarray | None = None  # svd_ar1 latent series (V_k')
    last_state: np.ndarray | None = None  # ar1: last column of Y
    trmf: TrmfModel | None = None  # tcf payload


def _ridge_transition(states: np.ndarray, lam: float, label: str) -> np.ndarray:
    """A minimizing ||next - A @ prev||_F^2 + lam ||A||_F^2 over columns."""
    prev = states[:, :-1]
    nxt = states[:, 1:]
    gram = prev @ prev.T + lam * np.eye(states.shape[0])
    try:
        return cholesky_solve(gram, prev @ nxt.T).T
    except NotSPD as exc:
        raise DegenerateRidge(
            f"{label} transition estimate is rank deficient; use lam > 0"
        ) from exc


def fit_mean(data: ObservedSeries) -> BaselineModel:
    """Predict every entry with the mean of the observed portion."""
    if data.observed_count == 0:
        raise EmptyMask("no observed entries")
    value = float(data.values[data.mask].mean())
    return BaselineModel(kind="mean", n=data.n, t_count=data.t_count, mean_value=value)


def fit_ar1_full(data: ObservedSeries, lam: float) -> BaselineModel:
    """Full n-dimensional lag-1 transition, fit by per-row ridge."""
    if not data.fully_observed():
        raise MissingValuesUnsupported("full AR(1) cannot handle missing values")
    if data.t_count < 2:
        raise ValueError("need at least two time points")
    transition = _ridge_transition(data.values, lam, "AR(1)")
    return BaselineModel(
        kind="ar1",
        n=data.n,
        t_count=data.t_count,
        transition=transition,
        last_state=data.values[:, -1].copy(),
    )


def fit_svd_ar1(data: ObservedSeries, k: int, lam: float) -> BaselineModel:
    """Rank-k truncated SVD, then a k-dimensional AR(1) on the latent rows."""
    if not data.fully_observed():
        raise MissingValuesUnsupported("SVD cannot handle missing values")
    u, s, vt = np.linalg.svd(data.values, full_matrices=False)
    k = min(k, s.shape[0])
    f_mat = u[:, :k] * s[:k]
    x_mat = vt[:k]
    transition = _ridge_transition(x_mat, lam, "latent AR(1)")
    return BaselineModel(
        kind="svd_ar1",
        n=data.n,
        t_count=data.t_count,
        transition=transition,
        f_mat=f_mat,
        x_mat=x_mat,
    )


def fit_tcf(data: ObservedSeries, hyper: Hyperparams) -> BaselineModel:
    """Chain-graph temporal factorization: the main solver with lag set {1}
    and all weights pinned to one."""
    pinned = ARWeights.constant(hyper.k, CHAIN_LAGS, 1.0)
    model = fit(data, hyper, CHAIN_LAGS, fixed_weights=pinned)
    return BaselineModel(kind="tcf", n=data.n, t_count=data.t_count, trmf=model)


def forecast_baseline(model: BaselineModel, horizon: int) -> np.ndarray:
    """n x horizon forecast for any fitted baseline."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if model.kind == "mean":
        return np.full((model.n, horizon), model.mean_value)
    if model.kind == "ar1":
        out = np.zeros((model.n, horizon))
        state = model.last_state
        for j in range(horizon):
            state = model.transition @ state
            out[:, j] = state
        return out
    if model.kind == "svd_ar1":
        k = model.transition.shape[0]
        out = np.zeros((k, horizon))
        state = model.x_mat[:, -1]
        for j in range(horizon):
            state = model.transition @ state
            out[:, j] = state
        return model.f_mat @ out
    if model.kind == "tcf":
        return forecast_series(model.trmf, horizon).y_new
    raise TrmfError(f"unknown baseline kind {model.kind!r}")


def impute_baseline(
    model: BaselineModel, targets: list[tuple[int, int]]
) -> list[tuple[int, int, float]]:
    """In-sample reconstruction of (series, time) entries where supported."""
    if model.kind == "mean":
        return [(i, t, float(model.mean_value)) for i, t in targets]
    if model.kind == "svd_ar1":
        return [(i, t, float(model.f_mat[i] @ model.x_mat[:, t])) for i, t in targets]
    if model.kind == "tcf":
        return impute(model.trmf, targets)
    raise TrmfError(f"baseline kind {model.kind!r} cannot impute")
