"""Relevance-driven resampling for imbalanced regression targets.

The sampler partitions a labeled dataset into rare and normal target bins
via a relevance function, then rebalances: normal bins are randomly
under-sampled and rare bins are grown with synthetic instances.  Each
synthetic instance starts from a rare seed and one of its k nearest
neighbours in the whole labeled set.  Close neighbours (within half the
median distance of the seed's neighbourhood) yield interpolated instances;
distant neighbours yield Gaussian feature perturbations of the seed instead,
which keeps synthesis conservative in sparse regions.

Every output row carries a :class:`SynthRecord` describing how it was made,
so rebalancing behaviour stays auditable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import DataError, Dataset, Instance, child_rng
from .distance import DistanceConfig, KnnModel, distance, knn_query
from .relevance import BinPartition, RelevanceFn, partition_bins

#: Id offset for synthetic instances, far above any plausible source row id.
SYNTHETIC_ID_BASE = 1 << 32

METHOD_SMOTER = "SMOTER"
METHOD_GAUSS = "GAUSS"
METHOD_ORIGINAL = "ORIGINAL"


@dataclass(frozen=True)
class SmognParams:
    """Sampler knobs.

    ``max_iterations`` is accepted for configuration compatibility and echoed
    into run reports, but no loop in this implementation consumes it.
    """

    threshold: float = 0.25
    k: int = 2
    perturbation: float = 0.05
    mode: str = "balance"  # "balance" | "fixed"
    under_frac: float = 1.0
    over_multiplier: float = 2.0
    seed: int = 0
    control_points: tuple | None = None
    max_iterations: int = 1000

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold < 1.0:
            raise DataError("threshold must lie strictly between 0 and 1")
        if self.k < 1:
            raise DataError("k must be at least 1")
        if not 0.0 <= self.perturbation <= 1.0:
            raise DataError("perturbation must lie in [0, 1]")
        if self.mode not in ("balance", "fixed"):
            raise DataError(f"unknown sampling mode {self.mode!r}")
        if not 0.0 < self.under_frac <= 1.0:
            raise DataError("under_frac must lie in (0, 1]")
        if self.over_multiplier < 1.0:
            raise DataError("over_multiplier must be at least 1")


@dataclass(frozen=True)
class SynthRecord:
    """Provenance of one output row: how it was made and from which rows."""

    method: str  # SMOTER | GAUSS | ORIGINAL
    seed_index: int  # row position in the sampler's input dataset
    neighbor_index: int | None = None


def safe_distance(seed: Instance, neighbors: list[Instance], cfg: DistanceConfig) -> float:
    """Half the median distance from a seed to its nearest neighbours."""
    if not neighbors:
        raise DataError("safe_distance needs at least one neighbour")
    dists = [distance(seed, nb, cfg) for nb in neighbors]
    return float(np.median(dists)) / 2.0


def smoter_interpolate(
    seed: Instance, neighbor: Instance, cfg: DistanceConfig, rng: np.random.Generator
) -> Instance:
    """A synthetic instance on the segment between seed and neighbour.

    Each numeric feature moves an independent uniform fraction of the way to
    the neighbour; each nominal feature copies one parent with equal odds.
    The target is the inverse-distance-weighted mean of the parents' targets
    (closer parent weighs more), or the plain mean when both distances vanish.
    """
    if seed.target is None or neighbor.target is None:
        raise DataError("interpolation parents must be labeled")
    sn = np.asarray(seed.numeric, dtype=float)
    nn = np.asarray(neighbor.numeric, dtype=float)
    u = rng.random(len(sn))
    new_numeric = sn + u * (nn - sn)
    keep = rng.random(len(seed.nominal)) < 0.5
    new_nominal = tuple(
        seed.nominal[j] if keep[j] else neighbor.nominal[j] for j in range(len(seed.nominal))
    )
    draft = Instance(numeric=tuple(float(v) for v in new_numeric), nominal=new_nominal, target=None)
    d_seed = distance(draft, seed, cfg)
    d_nb = distance(draft, neighbor, cfg)
    if d_seed + d_nb == 0.0:
        target = (seed.target + neighbor.target) / 2.0
    else:
        target = (d_nb * seed.target + d_seed * neighbor.target) / (d_seed + d_nb)
    return Instance(numeric=draft.numeric, nominal=draft.nominal, target=float(target))


def gaussian_perturb(
    seed: Instance,
    feature_sds: np.ndarray,
    target_sd: float,
    categories: list[tuple[str, ...]],
    perturbation: float,
    rng: np.random.Generator,
) -> Instance:
    """A jittered copy of the seed instance.

    Numeric features gain ``N(0, 1) * perturbation * sd_f`` noise (feature
    spreads measured over the full input set); each nominal feature is
    resampled uniformly from its observed categories with probability
    ``perturbation``; the target gains noise scaled by the spread of the
    seed's own bin, so synthetic targets stay local to the bin.
    """
    if seed.target is None:
        raise DataError("perturbation seed must be labeled")
    sn = np.asarray(seed.numeric, dtype=float)
    noise = rng.standard_normal(len(sn))
    new_numeric = sn + noise * perturbation * np.asarray(feature_sds, dtype=float)
    new_nominal = []
    for j, token in enumerate(seed.nominal):
        if rng.random() < perturbation:
            options = categories[j]
            new_nominal.append(options[int(rng.integers(len(options)))])
        else:
            new_nominal.append(token)
    target = seed.target + float(rng.standard_normal()) * perturbation * float(target_sd)
    return Instance(
        numeric=tuple(float(v) for v in new_numeric),
        nominal=tuple(new_nominal),
        target=float(target),
    )


def _bin_goal(size: int, mean_size: int, rare: bool, params: SmognParams) -> int:
    if params.mode == "balance":
        return max(size, mean_size) if rare else min(size, mean_size)
    if rare:
        return int(round(size * params.over_multiplier))
    return int(np.ceil(params.under_frac * size))


def smogn(
    d: Dataset, params: SmognParams, cfg: DistanceConfig | None = None
) -> tuple[Dataset, list[SynthRecord]]:
    """Rebalance a fully labeled dataset toward its rare target regions.

    Returns the resampled dataset (shuffled) and one provenance record per
    output row.  When the partition has no rare or no normal instances there
    is nothing to rebalance: the input is returned unchanged with
    all-ORIGINAL records and a warning.
    """
    if not np.all(d.labeled_mask):
        raise DataError("resampling requires a fully labeled dataset")
    if len(d) <= params.k:
        raise DataError(
            f"need more than k={params.k} instances for neighbour search, got {len(d)}"
        )
    if cfg is None:
        cfg = DistanceConfig.from_dataset(d, order=2.0)
    if params.control_points is not None:
        fn = RelevanceFn(params.control_points)
    else:
        fn = RelevanceFn.from_targets(d.y)
    partition = partition_bins(d, fn, params.threshold)
    rare_total = sum(len(b.indices) for b in partition.bins if b.rare)
    if rare_total == 0 or rare_total == len(d):
        which = "rare" if rare_total == 0 else "normal"
        warnings.warn(f"no {which} instances under threshold {params.threshold}; returning input unchanged")
        return d, [SynthRecord(METHOD_ORIGINAL, i) for i in range(len(d))]

    rng = child_rng(params.seed, "smogn")
    model = KnnModel(d, k=params.k, cfg=cfg)
    mean_size = int(np.floor(len(d) / len(partition.bins) + 0.5))
    feature_sds = d.numeric.std(axis=0) if d.numeric.shape[1] else np.zeros(0)
    categories = [
        tuple(sorted(set(d.nominal[:, j]))) for j in range(d.nominal.shape[1])
    ]

    out_numeric: list[np.ndarray] = []
    out_nominal: list[tuple] = []
    out_y: list[float] = []
    out_ids: list[int] = []
    records: list[SynthRecord] = []
    synth_counter = 0

    for b in partition.bins:
        rows = np.asarray(b.indices, dtype=np.int64)
        goal = _bin_goal(len(rows), mean_size, b.rare, params)
        if b.rare:
            kept = rows
        else:
            take = rng.choice(len(rows), size=goal, replace=False)
            kept = rows[np.sort(take)]
        for i in kept:
            out_numeric.append(d.numeric[i])
            out_nominal.append(tuple(d.nominal[i]))
            out_y.append(float(d.y[i]))
            out_ids.append(int(d.ids[i]))
            records.append(SynthRecord(METHOD_ORIGINAL, int(i)))
        if not b.rare:
            continue
        bin_target_sd = float(d.y[rows].std())
        for _ in range(goal - len(rows)):
            seed_row = int(rows[int(rng.integers(len(rows)))])
            seed_inst = d.instance(seed_row)
            hits = knn_query(model, seed_inst, k=params.k)
            safe = float(np.median([dist for _, dist in hits])) / 2.0
            pick = hits[int(rng.integers(len(hits)))]
            nb_row, nb_dist = pick
            if nb_dist <= safe:
                inst = smoter_interpolate(seed_inst, d.instance(nb_row), cfg, rng)
                records.append(SynthRecord(METHOD_SMOTER, seed_row, nb_row))
            else:
                inst = gaussian_perturb(
                    seed_inst, feature_sds, bin_target_sd, categories, params.perturbation, rng
                )
                records.append(SynthRecord(METHOD_GAUSS, seed_row))
            out_numeric.append(np.asarray(inst.numeric, dtype=float))
            out_nominal.append(inst.nominal)
            out_y.append(float(inst.target))
            out_ids.append(SYNTHETIC_ID_BASE + synth_counter)
            synth_counter += 1

    n_out = len(out_y)
    perm = rng.permutation(n_out)
    result = Dataset(
        d.schema,
        np.asarray(out_numeric, dtype=float).reshape(n_out, d.numeric.shape[1])[perm],
        np.asarray(out_nominal, dtype=object).reshape(n_out, d.nominal.shape[1])[perm],
        np.asarray(out_y, dtype=float)[perm],
        ids=np.asarray(out_ids, dtype=np.int64)[perm],
        provenance=f"{d.provenance}|resampled",
    )
    shuffled_records = [records[i] for i in perm]
    return result, shuffled_records


def partition_for(d: Dataset, params: SmognParams) -> BinPartition:
    """The rare/normal partition the sampler would use (for reports/audits)."""
    fn = (
        RelevanceFn(params.control_points)
        if params.control_points is not None
        else RelevanceFn.from_targets(d.y)
    )
    return partition_bins(d, fn, params.threshold)
