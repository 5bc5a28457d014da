"""Regression error metrics with explicit undefined-value semantics.

All means use the population convention (divide by n).  The coefficient of
determination is undefined when the truth vector has zero spread, and the
Pearson correlation is undefined when either vector has zero variance; both
cases surface as ``None`` (``null`` after JSON encoding) rather than NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import DataError


@dataclass(frozen=True)
class MetricsReport:
    mae: float
    rmse: float
    r_squared: float | None
    pcc: float | None
    n: int

    def to_dict(self) -> dict:
        return {
            "mae": self.mae,
            "rmse": self.rmse,
            "r2": self.r_squared,
            "pcc": self.pcc,
            "n": self.n,
        }


def evaluate(truth, predictions) -> MetricsReport:
    """Score predictions against ground truth (MAE, RMSE, R-squared, Pearson r)."""
    y = np.asarray(truth, dtype=float)
    p = np.asarray(predictions, dtype=float)
    if y.shape != p.shape or y.ndim != 1:
        raise DataError("truth and predictions must be 1-D vectors of equal length")
    if y.size == 0:
        raise DataError("cannot score an empty vector")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(p))):
        raise DataError("metrics require finite truth and prediction values")
    n = y.size
    err = p - y
    mae = float(np.mean(np.abs(err)))
    rss = float(err @ err)
    rmse = math.sqrt(rss / n)
    centered_y = y - y.mean()
    tss = float(centered_y @ centered_y)
    r_squared = None if tss == 0.0 else 1.0 - rss / tss
    centered_p = p - p.mean()
    var_p = float(centered_p @ centered_p)
    if tss == 0.0 or var_p == 0.0:
        pcc = None
    else:
        pcc = float(centered_y @ centered_p) / math.sqrt(tss * var_p)
        pcc = min(1.0, max(-1.0, pcc))
    return MetricsReport(mae=mae, rmse=rmse, r_squared=r_squared, pcc=pcc, n=int(n))
