"""Normalized deviation and normalized RMSE.

Both are normalized by the mean absolute value of the test-set truth, so
reports are comparable across series with different scales.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch, ZeroDenominator


def _check(pred: np.ndarray, truth: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.shape != truth.shape:
        raise DimensionMismatch(f"shapes differ: {pred.shape} vs {truth.shape}")
    if truth.size == 0:
        raise ZeroDenominator("empty test set")
    denom = float(np.mean(np.abs(truth)))
    if denom == 0.0:
        raise ZeroDenominator("mean absolute truth is zero")
    return pred, truth, denom


def nd(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean absolute error over mean absolute truth."""
    pred, truth, denom = _check(pred, truth)
    return float(np.mean(np.abs(pred - truth))) / denom


def nrmse(pred: np.ndarray, truth: np.ndarray) -> float:
    """Root-mean-square error over mean absolute truth."""
    pred, truth, denom = _check(pred, truth)
    return float(np.sqrt(np.mean((pred - truth) ** 2))) / denom


@dataclass(frozen=True)
class EvalReport:
    method: str
    split_id: str
    nd: float
    nrmse: float
    n_test: int

    CSV_HEADER = ("method", "split_id", "nd", "nrmse", "n_test")

    def csv_row(self) -> list[str]:
        return [self.method, self.split_id, repr(self.nd), repr(self.nrmse), str(self.n_test)]
