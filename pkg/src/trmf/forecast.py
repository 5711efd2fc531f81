"""Out-of-sample prediction and in-sample imputation for a fitted model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import IndexOutOfBounds, SeriesTooShort
from .model import ARWeights, TrmfModel


@dataclass(eq=False)
class ForecastResult:
    x_new: np.ndarray  # k x horizon latent forecasts
    y_new: np.ndarray  # n x horizon series forecasts, exactly f_mat @ x_new
    horizon: int


def forecast_latent(x_mat: np.ndarray, ar: ARWeights, horizon: int) -> np.ndarray:
    """Noise-free recursive rollout of the learned AR law.

    Column j is the weighted sum of lagged columns, reading already-forecast
    columns once the recursion outruns the observed window.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    x_mat = np.asarray(x_mat, dtype=float)
    k, t_count = x_mat.shape
    l_max = ar.lag_set.l_max
    if t_count < l_max:
        raise SeriesTooShort(f"need at least {l_max} time points, got {t_count}")
    ext = np.concatenate([x_mat, np.zeros((k, horizon))], axis=1)
    for j in range(horizon):
        t = t_count + j
        col = np.zeros(k)
        for a, l in enumerate(ar.lag_set.lags):
            col += ar.w[:, a] * ext[:, t - l]
        ext[:, t] = col
    return ext[:, t_count:]


def forecast_series(model: TrmfModel, horizon: int) -> ForecastResult:
    x_new = forecast_latent(model.x_mat, model.ar, horizon)
    return ForecastResult(x_new=x_new, y_new=model.f_mat @ x_new, horizon=horizon)


def impute(
    model: TrmfModel, targets: list[tuple[int, int]]
) -> list[tuple[int, int, float]]:
    """Reconstruct requested (series, time) entries as factor inner products."""
    out = []
    for i, t in targets:
        if not (0 <= i < model.n and 0 <= t < model.t_count):
            raise IndexOutOfBounds(f"target ({i}, {t}) outside {model.n}x{model.t_count}")
        out.append((i, t, float(model.f_mat[i] @ model.x_mat[:, t])))
    return out
