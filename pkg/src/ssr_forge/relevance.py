"""Target-relevance functions and rare/normal partitioning of a dataset.

A relevance function maps target values to [0, 1], with 1 marking the values
a sampler should treat as rare/important.  It is a monotone piecewise-cubic
Hermite interpolant through a small set of control points ``(y, phi, slope)``,
with Fritsch-Carlson slope limiting so the curve never overshoots between
points, and constant extrapolation outside the control range.

Control points are either supplied explicitly or derived automatically from
the target distribution: boxplot fences ``Q1 - 1.5*IQR`` and ``Q3 + 1.5*IQR``
(clamped to the observed min/max when no points fall beyond them) receive
relevance 1, the median receives relevance 0.  A fence that collapses onto
the median is dropped, which makes one- or zero-tailed functions possible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DataError, Dataset

ControlPoint = tuple[float, float, float]


def auto_control_points(targets: np.ndarray) -> list[ControlPoint]:
    """Boxplot-fence control points: (low fence, 1), (median, 0), (high fence, 1).

    Fences are clamped to the observed extremes when no observations fall
    outside them; degenerate sides (fence equal to the median) are dropped.
    """
    ys = np.asarray(targets, dtype=float)
    if ys.size == 0 or not np.all(np.isfinite(ys)):
        raise DataError("targets must be a non-empty finite vector")
    if np.unique(ys).size == 1:
        raise DataError("relevance undefined for constant target")
    if np.unique(ys).size < 4:
        raise DataError("relevance needs at least 4 distinct target values")
    q1, med, q3 = (float(q) for q in np.quantile(ys, [0.25, 0.5, 0.75]))
    iqr = q3 - q1
    lo = max(q1 - 1.5 * iqr, float(ys.min()))
    hi = min(q3 + 1.5 * iqr, float(ys.max()))
    points: list[ControlPoint] = []
    if lo < med:
        points.append((lo, 1.0, 0.0))
    points.append((med, 0.0, 0.0))
    if hi > med:
        points.append((hi, 1.0, 0.0))
    return points


def _limit_slopes(ys: np.ndarray, phis: np.ndarray, slopes: np.ndarray) -> np.ndarray:
    """Fritsch-Carlson adjustment: clamp slopes into the monotone region."""
    m = slopes.astype(float).copy()
    if len(ys) == 1:
        return np.zeros(1)
    secants = np.diff(phis) / np.diff(ys)
    for k, sec in enumerate(secants):
        if sec == 0.0:
            m[k] = 0.0
            m[k + 1] = 0.0
    for k, sec in enumerate(secants):
        if sec == 0.0:
            continue
        alpha = m[k] / sec
        beta = m[k + 1] / sec
        if alpha < 0.0:
            m[k] = 0.0
            alpha = 0.0
        if beta < 0.0:
            m[k + 1] = 0.0
            beta = 0.0
        radius = float(np.hypot(alpha, beta))
        if radius > 3.0:
            tau = 3.0 / radius
            m[k] = tau * alpha * sec
            m[k + 1] = tau * beta * sec
    return m


class RelevanceFn:
    """Callable relevance curve; evaluates scalars or arrays, clipped to [0, 1]."""

    def __init__(self, points) -> None:
        pts = []
        for p in points:
            if len(p) == 2:
                y, phi = p
                slope = 0.0
            else:
                y, phi, slope = p
            pts.append((float(y), float(phi), float(slope)))
        if not pts:
            raise DataError("relevance needs at least one control point")
        pts.sort(key=lambda t: t[0])
        ys = np.array([p[0] for p in pts])
        if np.unique(ys).size != ys.size:
            raise DataError("control point targets must be distinct")
        phis = np.array([p[1] for p in pts])
        if np.any(phis < 0.0) or np.any(phis > 1.0):
            raise DataError("control point relevance must lie in [0, 1]")
        self.ys = ys
        self.phis = phis
        self.slopes = _limit_slopes(ys, phis, np.array([p[2] for p in pts]))

    @classmethod
    def from_targets(cls, targets: np.ndarray) -> "RelevanceFn":
        return cls(auto_control_points(targets))

    @property
    def control_points(self) -> list[ControlPoint]:
        return [(float(y), float(p), float(m)) for y, p, m in zip(self.ys, self.phis, self.slopes)]

    def __call__(self, y):
        arr = np.asarray(y, dtype=float)
        scalar = arr.ndim == 0
        x = np.atleast_1d(arr)
        out = np.empty_like(x)
        # constant extrapolation outside the control range
        out[x <= self.ys[0]] = self.phis[0]
        out[x >= self.ys[-1]] = self.phis[-1]
        inside = (x > self.ys[0]) & (x < self.ys[-1])
        if np.any(inside):
            xi = x[inside]
            seg = np.searchsorted(self.ys, xi, side="right") - 1
            y0, y1 = self.ys[seg], self.ys[seg + 1]
            p0, p1 = self.phis[seg], self.phis[seg + 1]
            m0, m1 = self.slopes[seg], self.slopes[seg + 1]
            h = y1 - y0
            t = (xi - y0) / h
            t2 = t * t
            t3 = t2 * t
            val = (
                p0 * (2.0 * t3 - 3.0 * t2 + 1.0)
                + m0 * h * (t3 - 2.0 * t2 + t)
                + p1 * (-2.0 * t3 + 3.0 * t2)
                + m1 * h * (t3 - t2)
            )
            out[inside] = val
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if scalar else out


@dataclass(frozen=True)
class Bin:
    """A maximal run of same-rarity instances in target order."""

    indices: tuple[int, ...]  # row positions in the partitioned dataset
    rare: bool


@dataclass(frozen=True)
class BinPartition:
    bins: tuple[Bin, ...]
    threshold: float

    @property
    def rare_indices(self) -> np.ndarray:
        parts = [b.indices for b in self.bins if b.rare]
        return np.array([i for part in parts for i in part], dtype=np.int64)

    @property
    def normal_indices(self) -> np.ndarray:
        parts = [b.indices for b in self.bins if not b.rare]
        return np.array([i for part in parts for i in part], dtype=np.int64)


def partition_bins(d: Dataset, fn: RelevanceFn, threshold: float) -> BinPartition:
    """Split a fully labeled dataset into alternating rare/normal target bins.

    Instances are ordered by target; an instance is rare when
    ``fn(y) >= threshold``; bins are maximal runs of the same flag.
    """
    if not 0.0 < threshold < 1.0:
        raise DataError("rarity threshold must lie strictly between 0 and 1")
    if not np.all(d.labeled_mask):
        raise DataError("partitioning requires a fully labeled dataset")
    if len(d) == 0:
        return BinPartition(bins=(), threshold=threshold)
    order = np.argsort(d.y, kind="stable")
    flags = fn(d.y[order]) >= threshold
    bins: list[Bin] = []
    start = 0
    for i in range(1, len(order) + 1):
        if i == len(order) or flags[i] != flags[start]:
            bins.append(Bin(indices=tuple(int(j) for j in order[start:i]), rare=bool(flags[start])))
            start = i
    return BinPartition(bins=tuple(bins), threshold=threshold)
