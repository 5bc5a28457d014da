"""Mixed-type Minkowski distance and exact k-nearest-neighbour regression.

Numeric features are min-max normalized into [0, 1] (lazily, at distance
time, using per-feature ranges carried by :class:`DistanceConfig`) and
compared by absolute difference; nominal features contribute 0 on an exact
token match and 1 otherwise.  The per-feature terms feed a Minkowski sum of
order ``p``:

    d(a, b) = (sum_f delta_f(a, b) ** p) ** (1 / p)

Values outside a configured range clip to the [0, 1] boundary, and a
zero-width range contributes nothing, so the metric stays bounded for
out-of-reference queries.  Neighbour search is exhaustive and exact, with
distance ties broken toward the smaller reference index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DataError, Dataset, Instance


@dataclass(frozen=True)
class DistanceConfig:
    """Minkowski order and per-numeric-feature (min, max) normalization ranges."""

    order: float = 2.0
    numeric_ranges: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        if self.order < 1.0:
            raise DataError("distance order must be >= 1")
        for lo, hi in self.numeric_ranges:
            if hi < lo:
                raise DataError(f"invalid numeric range ({lo}, {hi})")

    @classmethod
    def from_dataset(cls, d: Dataset, order: float = 2.0) -> "DistanceConfig":
        """Ranges taken from the observed per-feature min/max of ``d``."""
        if len(d) == 0:
            raise DataError("cannot derive ranges from an empty dataset")
        ranges = tuple(
            (float(d.numeric[:, j].min()), float(d.numeric[:, j].max()))
            for j in range(d.numeric.shape[1])
        )
        return cls(order=order, numeric_ranges=ranges)


def _normalize_value(v: float, lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0
    x = (v - lo) / (hi - lo)
    return min(1.0, max(0.0, x))


def distance(a: Instance, b: Instance, cfg: DistanceConfig) -> float:
    """Scalar mixed-type distance between two instances."""
    if len(a.numeric) != len(cfg.numeric_ranges) or len(b.numeric) != len(cfg.numeric_ranges):
        raise DataError("instance numeric width does not match configured ranges")
    if len(a.nominal) != len(b.nominal):
        raise DataError("instances disagree on nominal feature count")
    acc = 0.0
    for va, vb, (lo, hi) in zip(a.numeric, b.numeric, cfg.numeric_ranges):
        acc += abs(_normalize_value(va, lo, hi) - _normalize_value(vb, lo, hi)) ** cfg.order
    for ta, tb in zip(a.nominal, b.nominal):
        if ta != tb:
            acc += 1.0
    return acc ** (1.0 / cfg.order)


class FeatureEncoder:
    """Shared numeric normalization + nominal integer coding for fast math.

    Nominal vocabularies grow lazily; two equal tokens always map to the same
    code, and a token never seen before gets a fresh code (hence distance 1
    against everything already encoded), which preserves the overlap metric.
    """

    def __init__(self, cfg: DistanceConfig) -> None:
        self.cfg = cfg
        self._vocabs: list[dict[str, int]] = []

    def _code(self, feature: int, token: str) -> int:
        while len(self._vocabs) <= feature:
            self._vocabs.append({})
        vocab = self._vocabs[feature]
        if token not in vocab:
            vocab[token] = len(vocab)
        return vocab[token]

    def encode_rows(self, numeric: np.ndarray, nominal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = len(numeric)
        xn = np.empty_like(numeric, dtype=float)
        for j, (lo, hi) in enumerate(self.cfg.numeric_ranges):
            if hi <= lo:
                xn[:, j] = 0.0
            else:
                xn[:, j] = np.clip((numeric[:, j] - lo) / (hi - lo), 0.0, 1.0)
        xc = np.empty(nominal.shape, dtype=np.int32)
        for j in range(nominal.shape[1]):
            col = nominal[:, j]
            xc[:, j] = [self._code(j, tok) for tok in col]
        return xn, xc.reshape(n, nominal.shape[1])

    def encode_instance(self, x: Instance) -> tuple[np.ndarray, np.ndarray]:
        xn, xc = self.encode_rows(
            np.asarray([x.numeric], dtype=float),
            np.asarray([list(x.nominal)], dtype=object).reshape(1, len(x.nominal)),
        )
        return xn[0], xc[0]


def dist_pow_to_point(xn_rows: np.ndarray, xc_rows: np.ndarray, xn: np.ndarray, xc: np.ndarray, order: float) -> np.ndarray:
    """Vector of d(row, x)**order against every encoded row (ranking kernel)."""
    if xn_rows.shape[1]:
        diffs = np.abs(xn_rows - xn)
        if order == 2.0:
            acc = np.einsum("ij,ij->i", diffs, diffs)
        else:
            acc = (diffs**order).sum(axis=1)
    else:
        acc = np.zeros(len(xn_rows))
    if xc_rows.shape[1]:
        acc = acc + (xc_rows != xc).sum(axis=1)
    return acc


def dist_pow_pairwise(an: np.ndarray, ac: np.ndarray, bn: np.ndarray, bc: np.ndarray, order: float, block: int = 256) -> np.ndarray:
    """(len(a), len(b)) matrix of d**order, computed in row blocks."""
    out = np.empty((len(an), len(bn)))
    for start in range(0, len(an), block):
        stop = min(start + block, len(an))
        if an.shape[1]:
            diffs = np.abs(an[start:stop, None, :] - bn[None, :, :])
            if order == 2.0:
                acc = np.einsum("ijk,ijk->ij", diffs, diffs)
            else:
                acc = (diffs**order).sum(axis=2)
        else:
            acc = np.zeros((stop - start, len(bn)))
        if ac.shape[1]:
            acc = acc + (ac[start:stop, None, :] != bc[None, :, :]).sum(axis=2)
        out[start:stop] = acc
    return out


class KnnModel:
    """Exact k-NN regressor over a fully labeled reference dataset.

    Prediction is the unweighted mean target of the ``k`` nearest reference
    instances.  When the query instance is itself a member of the reference
    (same instance id), that member is skipped, so in-sample predictions are
    leave-self-out.
    """

    def __init__(self, reference: Dataset, k: int, cfg: DistanceConfig | None = None, order: float = 2.0) -> None:
        if len(reference) == 0:
            raise DataError("k-NN reference must be non-empty")
        if not np.all(reference.labeled_mask):
            raise DataError("k-NN reference must be fully labeled")
        if k < 1 or k > len(reference):
            raise DataError(f"k={k} out of range for reference of size {len(reference)}")
        self.reference = reference
        self.k = k
        self.cfg = cfg if cfg is not None else DistanceConfig.from_dataset(reference, order)
        self.encoder = FeatureEncoder(self.cfg)
        self.xn, self.xc = self.encoder.encode_rows(reference.numeric, reference.nominal)

    def _distances_to(self, x: Instance) -> np.ndarray:
        qn, qc = self.encoder.encode_instance(x)
        return dist_pow_to_point(self.xn, self.xc, qn, qc, self.cfg.order)


def knn_query(model: KnnModel, x: Instance, k: int | None = None) -> list[tuple[int, float]]:
    """The ``k`` nearest reference rows as (index, distance), ascending.

    Equal distances rank by smaller reference index.  A reference member
    equal to ``x`` by instance id is excluded from the candidates.
    """
    k = model.k if k is None else k
    pow_d = model._distances_to(x)
    candidates = np.arange(len(pow_d))
    if x.uid is not None:
        keep = model.reference.ids != x.uid
        candidates = candidates[keep]
        pow_d = pow_d[keep]
    if k < 1 or k > len(candidates):
        raise DataError(f"k={k} out of range for {len(candidates)} candidates")
    order = np.argsort(pow_d, kind="stable")[:k]
    inv = 1.0 / model.cfg.order
    return [(int(candidates[i]), float(pow_d[i] ** inv)) for i in order]


def knn_predict(model: KnnModel, x: Instance) -> float:
    """Unweighted mean target of the model's k nearest neighbours of ``x``."""
    hits = knn_query(model, x)
    return float(np.mean([model.reference.y[i] for i, _ in hits]))


def knn_predict_rows(model: KnnModel, d: Dataset) -> np.ndarray:
    """Batch prediction for every row of ``d``.

    No identity exclusion is applied: callers must ensure the query rows are
    not members of the reference set.
    """
    qn, qc = model.encoder.encode_rows(d.numeric, d.nominal)
    pows = dist_pow_pairwise(qn, qc, model.xn, model.xc, model.cfg.order)
    nearest = np.argsort(pows, axis=1, kind="stable")[:, : model.k]
    return model.reference.y[nearest].mean(axis=1)
