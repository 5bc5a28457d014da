"""Supervised baselines and an agreement-based self-training ensemble.

The linear baseline one-hot encodes nominal features (first category in
sorted order dropped) and fits ordinary least squares, falling back to a
tiny ridge penalty only when the design matrix is rank deficient.  The
self-training ensemble (``mssra-knn``) trains several k-NN regressors with
different k on the shared labeled set and, each round, pseudo-labels the
unlabeled instances on which all base learners agree within a tolerance,
using the mean of their predictions as the label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DataError, Dataset, Instance
from .distance import KnnModel, knn_predict_rows


@dataclass(frozen=True)
class LinearModel:
    """Least-squares fit over numeric + one-hot-encoded nominal features."""

    intercept: float
    coefficients: np.ndarray
    categories: tuple[tuple[str, ...], ...]  # per nominal feature, sorted; first dropped
    ridge_fallback: bool

    @property
    def n_coefficients(self) -> int:
        return 1 + len(self.coefficients)


def _design_matrix(d: Dataset, categories: tuple[tuple[str, ...], ...]) -> np.ndarray:
    blocks = [np.ones((len(d), 1)), d.numeric]
    for j, cats in enumerate(categories):
        col = d.nominal[:, j]
        for token in cats[1:]:  # drop-first coding; unseen tokens encode as all zeros
            blocks.append((col == token).astype(float).reshape(-1, 1))
    return np.hstack(blocks)


def fit_linear(labeled: Dataset) -> LinearModel:
    """Ordinary least squares on a fully labeled dataset.

    Raises when there are fewer instances than coefficients plus one.  On a
    rank-deficient design the fit repeats with a ridge penalty of 1e-8 and
    the model is flagged accordingly.
    """
    if not np.all(labeled.labeled_mask):
        raise DataError("linear fit requires a fully labeled dataset")
    categories = tuple(
        tuple(sorted(set(labeled.nominal[:, j]))) for j in range(labeled.nominal.shape[1])
    )
    a = _design_matrix(labeled, categories)
    n_coef = a.shape[1]
    if len(labeled) < n_coef + 1:
        raise DataError(
            f"need at least {n_coef + 1} labeled instances for {n_coef} coefficients, "
            f"got {len(labeled)}"
        )
    beta, _, rank, _ = np.linalg.lstsq(a, labeled.y, rcond=None)
    ridge = rank < n_coef
    if ridge:
        gram = a.T @ a + 1e-8 * np.eye(n_coef)
        beta = np.linalg.solve(gram, a.T @ labeled.y)
    return LinearModel(
        intercept=float(beta[0]),
        coefficients=np.asarray(beta[1:], dtype=float),
        categories=categories,
        ridge_fallback=bool(ridge),
    )


def predict_linear_rows(model: LinearModel, d: Dataset) -> np.ndarray:
    blocks = [d.numeric]
    for j, cats in enumerate(model.categories):
        col = d.nominal[:, j]
        for token in cats[1:]:
            blocks.append((col == token).astype(float).reshape(-1, 1))
    x = np.hstack(blocks) if blocks else np.zeros((len(d), 0))
    return model.intercept + x @ model.coefficients


def predict_linear(model: LinearModel, x: Instance) -> float:
    acc = model.intercept
    pos = 0
    for v in x.numeric:
        acc += model.coefficients[pos] * v
        pos += 1
    for j, cats in enumerate(model.categories):
        for token in cats[1:]:
            if x.nominal[j] == token:
                acc += model.coefficients[pos]
            pos += 1
    return float(acc)


def knn_baseline(labeled: Dataset, k: int) -> KnnModel:
    """Plain Euclidean-order k-NN on the labeled set."""
    return KnnModel(labeled, k=k, order=2.0)


@dataclass(frozen=True)
class SelfTrainParams:
    """Agreement self-training knobs.

    ``agreement_tol`` of None means 5% of the labeled target range.
    """

    base_ks: tuple[int, ...] = (3, 7, 9)
    agreement_tol: float | None = None
    max_rounds: int = 10

    def __post_init__(self) -> None:
        if not self.base_ks or any(k < 1 for k in self.base_ks):
            raise DataError("base_ks must be a non-empty tuple of positive ints")
        if self.agreement_tol is not None and self.agreement_tol < 0:
            raise DataError("agreement_tol must be non-negative")
        if self.max_rounds < 1:
            raise DataError("max_rounds must be at least 1")


@dataclass(frozen=True)
class SelfTrainModel:
    base_models: tuple[KnnModel, ...]
    tolerance: float
    rounds_run: int
    pseudo_labeled: int


def self_train_mssra(
    labeled: Dataset, unlabeled: Dataset, params: SelfTrainParams = SelfTrainParams()
) -> SelfTrainModel:
    """Grow the labeled set with consensus pseudo-labels, then refit the bases.

    Each round every base k-NN predicts all remaining unlabeled instances;
    instances whose prediction spread (max minus min) stays within the
    tolerance are adopted with the mean prediction as pseudo-label.  Training
    stops when a round adopts nothing or the round budget is exhausted.
    Prediction is the mean of the final base models.
    """
    if not np.all(labeled.labeled_mask):
        raise DataError("self-training requires a fully labeled seed set")
    if len(labeled) < max(params.base_ks):
        raise DataError(
            f"labeled seed of size {len(labeled)} cannot support k={max(params.base_ks)}"
        )
    if unlabeled.schema != labeled.schema:
        raise DataError("labeled and unlabeled sets must share a schema")
    tol = params.agreement_tol
    if tol is None:
        tol = 0.05 * float(labeled.y.max() - labeled.y.min())
    current = labeled
    alive = np.ones(len(unlabeled), dtype=bool)
    rounds_run = 0
    adopted_total = 0
    for _ in range(params.max_rounds):
        rows = np.flatnonzero(alive)
        if rows.size == 0:
            break
        rounds_run += 1
        pending = unlabeled.take(rows)
        bases = [KnnModel(current, k=k, order=2.0) for k in params.base_ks]
        preds = np.stack([knn_predict_rows(b, pending) for b in bases])
        spread = preds.max(axis=0) - preds.min(axis=0)
        agree = spread <= tol
        if not np.any(agree):
            break
        adopted = pending.take(np.flatnonzero(agree))
        adopted = adopted.relabeled(preds.mean(axis=0)[agree])
        current = current.concat(adopted)
        alive[rows[agree]] = False
        adopted_total += len(adopted)
    final_bases = tuple(KnnModel(current, k=k, order=2.0) for k in params.base_ks)
    return SelfTrainModel(
        base_models=final_bases,
        tolerance=float(tol),
        rounds_run=rounds_run,
        pseudo_labeled=adopted_total,
    )


def self_train_predict_rows(model: SelfTrainModel, d: Dataset) -> np.ndarray:
    preds = np.stack([knn_predict_rows(b, d) for b in model.base_models])
    return preds.mean(axis=0)
