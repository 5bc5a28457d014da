"""Co-training of two k-NN regressors that teach each other from unlabeled data.

The two learners share the same labeled seed set but measure distance with
different Minkowski orders, which gives them genuinely different neighbour
structure.  Each round, a random pool of unlabeled instances is scored by
each learner: a candidate's score is the drop in squared error that adopting
its pseudo-label would produce over the candidate's labeled neighbourhood,

    delta = sum_{x_i in Omega} [ (y_i - h(x_i))^2  -  (y_i - h'(x_i))^2 ]

where ``Omega`` holds the learner's k nearest labeled neighbours of the
candidate, ``h`` is the learner as-is and ``h'`` is the learner retrained
with the candidate added under its own predicted label.  The best strictly
positive candidate from each learner is handed to the *other* learner,
removed from the pool, and training repeats until neither learner finds a
helpful candidate or the iteration budget runs out.  Prediction averages the
two learners.

Retraining a lazy k-NN learner is a set union, so ``h'`` differs from ``h``
only where the new point enters a neighbour list; the implementation exploits
this with sorted per-instance neighbour caches instead of re-querying, while
staying exactly equivalent to a full rebuild (ties resolve toward smaller
reference index, and an appended point always has the largest index).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DataError, Dataset, Instance, child_rng
from .distance import (
    DistanceConfig,
    FeatureEncoder,
    KnnModel,
    dist_pow_pairwise,
    dist_pow_to_point,
    knn_predict,
)


@dataclass(frozen=True)
class CoregParams:
    """Co-training knobs; the two distance orders must differ."""

    k1: int = 3
    k2: int = 3
    p1: float = 2.0
    p2: float = 3.0
    max_iterations: int = 500
    pool_size: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k1 < 1 or self.k2 < 1:
            raise DataError("neighbour counts must be at least 1")
        if self.p1 < 1.0 or self.p2 < 1.0:
            raise DataError("distance orders must be at least 1")
        if self.p1 == self.p2:
            raise DataError("the two learners must use different distance orders")
        if self.max_iterations < 1:
            raise DataError("max_iterations must be at least 1")
        if self.pool_size < 1:
            raise DataError("pool_size must be at least 1")

    @classmethod
    def preset(cls, name: str, **overrides) -> "CoregParams":
        """Named configurations: ``default`` and the conservative ``initial``
        (100-iteration budget)."""
        if name == "default":
            return cls(**overrides)
        if name == "initial":
            return cls(max_iterations=100, **overrides)
        raise DataError(f"unknown preset {name!r}")


@dataclass(frozen=True)
class HistoryEntry:
    iteration: int  # 1-based training round
    learner: int  # which learner produced the pseudo-label (1 or 2)
    uid: int  # instance id of the adopted unlabeled instance
    delta: float
    pseudo_label: float


@dataclass(frozen=True)
class CoregModel:
    learner1: KnnModel
    learner2: KnnModel
    params: CoregParams
    history: tuple[HistoryEntry, ...]
    iterations_run: int


def delta_mse(model: KnnModel, x_u: Instance, y_hat: float) -> float:
    """Squared-error improvement over x_u's labeled neighbourhood if (x_u, y_hat)
    were added to the model's reference set.

    Positive values mean the pseudo-labeled candidate is expected to help.
    ``x_u`` must not already be part of the reference.
    """
    ref = model.reference
    if x_u.uid is not None and np.any(ref.ids == x_u.uid):
        raise DataError("candidate instance is already in the labeled reference")
    n, k = len(ref), model.k
    if n < k:
        raise DataError(f"reference of size {n} cannot support k={k}")
    qn, qc = model.encoder.encode_instance(x_u)
    pow_u = dist_pow_to_point(model.xn, model.xc, qn, qc, model.cfg.order)
    omega = np.argsort(pow_u, kind="stable")[:k]
    total = 0.0
    for i in omega:
        pow_i = dist_pow_to_point(model.xn, model.xc, model.xn[i], model.xc[i], model.cfg.order)
        pow_i[i] = np.inf  # leave-self-out
        k_in = min(k, n - 1)
        nbrs = np.argsort(pow_i, kind="stable")[:k_in]
        t_nbrs = ref.y[nbrs]
        h_i = float(np.mean(t_nbrs))
        if k_in < k:
            # room left in the neighbour list: the candidate always joins
            h_prime = float(np.mean(np.append(t_nbrs, y_hat)))
        elif pow_u[i] < pow_i[nbrs[-1]]:
            h_prime = float(np.mean(np.append(t_nbrs[:-1], y_hat)))
        else:
            h_prime = h_i
        y_i = float(ref.y[i])
        total += (y_i - h_i) ** 2 - (y_i - h_prime) ** 2
    return float(total)


def _stable_topk(d: np.ndarray, k: int) -> np.ndarray:
    """Row-wise index sets of the ``k`` smallest entries of ``d``.

    Equivalent in membership to a stable full argsort prefix — boundary ties
    go to the smaller index — but runs in linear time via partitioning.  Each
    returned row lists its members in ascending index order, which is fine for
    the callers: neighbourhood means and per-member lookups are order-free.
    """
    n, m = d.shape
    part = np.argpartition(d, k - 1, axis=1)[:, :k]
    vk = np.take_along_axis(d, part, axis=1).max(axis=1)
    mask = d <= vk[:, None]
    counts = mask.sum(axis=1)
    for r in np.flatnonzero(counts > k):
        ties = np.flatnonzero(d[r] == vk[r])
        n_less = int((d[r] < vk[r]).sum())
        mask[r, ties[k - n_less :]] = False
    cols = np.nonzero(mask)[1]
    return cols.reshape(n, k)


class _LearnerState:
    """Growable labeled set with encoded features, candidate distances, and
    sorted in-sample neighbour caches."""

    def __init__(self, labeled: Dataset, unlabeled: Dataset, k: int, cfg: DistanceConfig, capacity: int):
        self.k = k
        self.cfg = cfg
        self.encoder = FeatureEncoder(cfg)
        ln, lc = self.encoder.encode_rows(labeled.numeric, labeled.nominal)
        self.un, self.uc = self.encoder.encode_rows(unlabeled.numeric, unlabeled.nominal)
        n0 = len(labeled)
        d_num, d_nom = ln.shape[1], lc.shape[1]
        self.size = n0
        self.ln = np.zeros((capacity, d_num))
        self.lc = np.zeros((capacity, d_nom), dtype=np.int32)
        self.ly = np.zeros(capacity)
        self.ln[:n0], self.lc[:n0], self.ly[:n0] = ln, lc, labeled.y
        self.added_rows: list[int] = []  # row positions into the unlabeled set
        self.added_labels: list[float] = []
        # pow-distances from every unlabeled row to every labeled column
        self.dul = np.zeros((len(unlabeled), capacity))
        self.dul[:, :n0] = dist_pow_pairwise(self.un, self.uc, ln, lc, cfg.order)
        # sorted leave-self-out neighbour caches
        self.nb_pow = np.full((capacity, k), np.inf)
        self.nb_tar = np.zeros((capacity, k))
        self.nb_cnt = np.zeros(capacity, dtype=np.int64)
        dll = dist_pow_pairwise(ln, lc, ln, lc, cfg.order)
        np.fill_diagonal(dll, np.inf)
        k_in = min(k, n0 - 1)
        if k_in > 0:
            order = np.argsort(dll, axis=1, kind="stable")[:, :k_in]
            self.nb_pow[:n0, :k_in] = np.take_along_axis(dll, order, axis=1)
            self.nb_tar[:n0, :k_in] = self.ly[order]
        self.nb_cnt[:n0] = k_in

    def append(self, u_row: int, label: float) -> None:
        i = self.size
        xn, xc = self.un[u_row], self.uc[u_row]
        # distances from existing labeled rows to the newcomer
        d_l = dist_pow_to_point(self.ln[:i], self.lc[:i], xn, xc, self.cfg.order)
        # update neighbour caches of rows the newcomer now serves
        affected = np.flatnonzero(d_l < self.nb_pow[:i, self.k - 1])
        for r in affected:
            cnt = self.nb_cnt[r]
            pos = int(np.searchsorted(self.nb_pow[r, :cnt], d_l[r], side="right"))
            self.nb_pow[r, pos + 1 : self.k] = self.nb_pow[r, pos : self.k - 1]
            self.nb_tar[r, pos + 1 : self.k] = self.nb_tar[r, pos : self.k - 1]
            self.nb_pow[r, pos] = d_l[r]
            self.nb_tar[r, pos] = label
            self.nb_cnt[r] = min(cnt + 1, self.k)
        # own cache: nearest existing rows, kept in ascending-distance order
        k_in = min(self.k, i)
        if k_in:
            members = _stable_topk(d_l[None, :], k_in)[0]
            order = members[np.argsort(d_l[members], kind="stable")]
            self.nb_pow[i, :k_in] = d_l[order]
            self.nb_tar[i, :k_in] = self.ly[order]
        self.nb_cnt[i] = k_in
        # register the newcomer as a labeled column
        self.ln[i], self.lc[i], self.ly[i] = xn, xc, label
        self.dul[:, i] = dist_pow_to_point(self.un, self.uc, xn, xc, self.cfg.order)
        self.added_rows.append(u_row)
        self.added_labels.append(float(label))
        self.size = i + 1

    def evaluate_pool(self, cand: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(pseudo-labels, deltas) for candidate unlabeled rows, vectorised."""
        k = self.k
        d_pool = self.dul[cand, : self.size]
        omega = _stable_topk(d_pool, k)
        t_omega = self.ly[omega]
        y_hat = t_omega.mean(axis=1)
        d_uo = np.take_along_axis(d_pool, omega, axis=1)
        cnt = self.nb_cnt[omega]
        valid = np.arange(k)[None, None, :] < cnt[..., None]
        tar_cache = self.nb_tar[omega]
        sums = (tar_cache * valid).sum(axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            h_in = sums / cnt
        kth_pow = self.nb_pow[omega, k - 1]
        full = cnt == k
        enters_full = full & (d_uo < kth_pow)
        h_prime = h_in.copy()
        h_prime[enters_full] = (
            sums[enters_full] - self.nb_tar[omega, k - 1][enters_full] + y_hat[np.nonzero(enters_full)[0]]
        ) / k
        partial = ~full
        if np.any(partial):
            h_prime[partial] = (sums[partial] + y_hat[np.nonzero(partial)[0]]) / (cnt[partial] + 1)
        delta = ((t_omega - h_in) ** 2 - (t_omega - h_prime) ** 2).sum(axis=1)
        return y_hat, delta


def coreg_train(
    labeled: Dataset,
    unlabeled: Dataset,
    params: CoregParams = CoregParams(),
    cfg1: DistanceConfig | None = None,
    cfg2: DistanceConfig | None = None,
) -> CoregModel:
    """Run the co-training loop and return the pair of grown k-NN learners.

    Distance normalization ranges default to the initial labeled set and stay
    fixed while the reference sets grow, so that adding a pseudo-labeled
    instance never re-scales existing geometry.
    """
    if not np.all(labeled.labeled_mask):
        raise DataError("co-training requires a fully labeled seed set")
    if len(labeled) < max(params.k1, params.k2):
        raise DataError(
            f"labeled seed of size {len(labeled)} cannot support k={max(params.k1, params.k2)}"
        )
    if unlabeled.schema != labeled.schema:
        raise DataError("labeled and unlabeled sets must share a schema")
    if len(unlabeled) and np.intersect1d(labeled.ids, unlabeled.ids).size:
        raise DataError("labeled and unlabeled sets must be disjoint by instance id")
    if cfg1 is None:
        cfg1 = DistanceConfig.from_dataset(labeled, order=params.p1)
    if cfg2 is None:
        cfg2 = DistanceConfig.from_dataset(labeled, order=params.p2)

    capacity = len(labeled) + params.max_iterations
    states = {
        1: _LearnerState(labeled, unlabeled, params.k1, cfg1, capacity),
        2: _LearnerState(labeled, unlabeled, params.k2, cfg2, capacity),
    }
    rng = child_rng(params.seed, "coreg-pool")
    alive = np.ones(len(unlabeled), dtype=bool)
    history: list[HistoryEntry] = []
    iterations_run = 0

    for iteration in range(1, params.max_iterations + 1):
        avail = np.flatnonzero(alive)
        if avail.size == 0:
            break
        iterations_run = iteration
        pool = rng.choice(avail, size=min(params.pool_size, avail.size), replace=False)
        any_selected = False
        for j in (1, 2):
            cand = pool[alive[pool]]
            if cand.size == 0:
                continue
            y_hat, delta = states[j].evaluate_pool(cand)
            scores = np.where(delta > 0.0, delta, -np.inf)
            best = int(np.argmax(scores))
            if not np.isfinite(scores[best]):
                continue
            u_row = int(cand[best])
            label = float(y_hat[best])
            states[3 - j].append(u_row, label)
            alive[u_row] = False
            any_selected = True
            history.append(
                HistoryEntry(
                    iteration=iteration,
                    learner=j,
                    uid=int(unlabeled.ids[u_row]),
                    delta=float(delta[best]),
                    pseudo_label=label,
                )
            )
        if not any_selected:
            break

    def final_model(state: _LearnerState, k: int, cfg: DistanceConfig) -> KnnModel:
        grown = labeled
        if state.added_rows:
            extra = unlabeled.take(np.asarray(state.added_rows, dtype=np.int64))
            extra = extra.relabeled(np.asarray(state.added_labels))
            grown = labeled.concat(extra)
        return KnnModel(grown, k=k, cfg=cfg)

    return CoregModel(
        learner1=final_model(states[1], params.k1, cfg1),
        learner2=final_model(states[2], params.k2, cfg2),
        params=params,
        history=tuple(history),
        iterations_run=iterations_run,
    )


def coreg_predict(model: CoregModel, x: Instance) -> float:
    """Average of the two learners' k-NN predictions."""
    return (knn_predict(model.learner1, x) + knn_predict(model.learner2, x)) / 2.0
