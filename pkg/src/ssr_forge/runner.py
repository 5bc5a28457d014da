"""Cross-validated experiment harness for the semi-supervised samplers.

A run loads a fully labeled dataset, k-folds it, masks a fraction of each
training fold's targets (the unlabeled ratio), trains every requested model
per fold, and scores the untouched test fold.  Resampling, when a model asks
for it, is applied to the labeled part only, after the labeled/unlabeled
split — never to test data — and each fold records the instance ids every
model trained on so disjointness is auditable.

Reports are deterministic: a run is a pure function of (config, root seed),
and ``report.json`` is written canonically so identical runs are
byte-identical.  Wall-clock information goes to the logger, never the report.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from . import __version__
from .baselines import (
    SelfTrainParams,
    fit_linear,
    knn_baseline,
    predict_linear_rows,
    self_train_mssra,
    self_train_predict_rows,
)
from .coreg import CoregParams, coreg_train
from .data import (
    DataError,
    Dataset,
    Schema,
    SplitSpec,
    child_rng,
    child_seed,
    kfold,
    load_csv,
    split_labeled,
)
from .distance import knn_predict_rows
from .metrics import evaluate
from .smogn import SmognParams, smogn
from .synth import FunctionTarget, MixtureTarget, SynthSpec

log = logging.getLogger(__name__)

MODEL_IDS = ("knn4", "knn7", "knn9", "lr", "mssra-knn", "coreg", "smogn-coreg")
METRIC_KEYS = ("mae", "rmse", "r2", "pcc")


class ConfigError(ValueError):
    """Raised for unreadable, unknown, or ill-typed configuration input."""


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    schema: str
    output_dir: str = "out"
    models: tuple[str, ...] = MODEL_IDS
    folds: int = 10
    unlabeled_ratio: float = 0.8
    budget_ur: float | None = None
    seed: int = 0
    histogram_bins: int = 20
    smogn: SmognParams = field(default_factory=SmognParams)
    coreg: CoregParams = field(default_factory=CoregParams)
    self_train: SelfTrainParams = field(default_factory=SelfTrainParams)

    def __post_init__(self) -> None:
        unknown = [m for m in self.models if m not in MODEL_IDS]
        if unknown:
            raise ConfigError(f"unknown model id(s): {unknown}; known: {list(MODEL_IDS)}")
        if not self.models:
            raise ConfigError("at least one model must be selected")
        if self.folds < 2:
            raise ConfigError("folds must be at least 2")
        if not 0.0 <= self.unlabeled_ratio < 1.0:
            raise ConfigError("unlabeled_ratio must lie in [0, 1)")
        if self.budget_ur is not None and not 0.0 <= self.budget_ur < 1.0:
            raise ConfigError("budget_ur must lie in [0, 1)")
        if self.histogram_bins < 1:
            raise ConfigError("histogram_bins must be positive")


# ---------------------------------------------------------------------------
# config file parsing
# ---------------------------------------------------------------------------

_SECTION_KEYS = {
    "experiment": {"dataset", "schema", "output_dir", "models", "histogram_bins"},
    "split": {"folds", "unlabeled_ratio", "budget_ur", "seed"},
    "smogn": {
        "threshold",
        "k",
        "perturbation",
        "mode",
        "under_frac",
        "over_multiplier",
        "seed",
        "control_points",
        "max_iterations",
    },
    "coreg": {"preset", "k1", "k2", "p1", "p2", "max_iterations", "pool_size", "seed"},
    "self_train": {"base_ks", "agreement_tol", "max_rounds"},
    "synth": {
        "n",
        "numeric_features",
        "nominal_cardinalities",
        "rare_fraction",
        "seed",
        "target",
        "weights",
        "means",
        "sds",
        "transition",
        "noise_sd",
    },
}


def read_config_file(path: str) -> dict:
    """Parse a TOML config document and reject unknown sections/keys."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path}: {exc}") from exc
    for section, content in doc.items():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(content, dict):
            raise ConfigError(f"config section [{section}] must be a table")
        unknown = set(content) - _SECTION_KEYS[section]
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}]: {sorted(unknown)}")
    return doc


def _typed(doc: dict, section: str, key: str, kinds, default):
    value = doc.get(section, {}).get(key, default)
    if value is default:
        return default
    if kinds is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, kinds) or isinstance(value, bool) and kinds is not bool:
        raise ConfigError(f"[{section}] {key}: expected {kinds}, got {type(value).__name__}")
    return value


def _smogn_params(doc: dict) -> SmognParams:
    base = SmognParams()
    points = doc.get("smogn", {}).get("control_points", None)
    if points is not None:
        try:
            points = tuple(tuple(float(v) for v in p) for p in points)
        except (TypeError, ValueError):
            raise ConfigError("[smogn] control_points must be a list of [y, phi, slope] rows") from None
    try:
        return SmognParams(
            threshold=_typed(doc, "smogn", "threshold", float, base.threshold),
            k=_typed(doc, "smogn", "k", int, base.k),
            perturbation=_typed(doc, "smogn", "perturbation", float, base.perturbation),
            mode=_typed(doc, "smogn", "mode", str, base.mode),
            under_frac=_typed(doc, "smogn", "under_frac", float, base.under_frac),
            over_multiplier=_typed(doc, "smogn", "over_multiplier", float, base.over_multiplier),
            seed=_typed(doc, "smogn", "seed", int, base.seed),
            control_points=points,
            max_iterations=_typed(doc, "smogn", "max_iterations", int, base.max_iterations),
        )
    except DataError as exc:
        raise ConfigError(f"[smogn] {exc}") from exc


def _coreg_params(doc: dict) -> CoregParams:
    preset = _typed(doc, "coreg", "preset", str, "default")
    try:
        base = CoregParams.preset(preset)
        return CoregParams(
            k1=_typed(doc, "coreg", "k1", int, base.k1),
            k2=_typed(doc, "coreg", "k2", int, base.k2),
            p1=_typed(doc, "coreg", "p1", float, base.p1),
            p2=_typed(doc, "coreg", "p2", float, base.p2),
            max_iterations=_typed(doc, "coreg", "max_iterations", int, base.max_iterations),
            pool_size=_typed(doc, "coreg", "pool_size", int, base.pool_size),
            seed=_typed(doc, "coreg", "seed", int, base.seed),
        )
    except DataError as exc:
        raise ConfigError(f"[coreg] {exc}") from exc


def _self_train_params(doc: dict) -> SelfTrainParams:
    base = SelfTrainParams()
    ks = doc.get("self_train", {}).get("base_ks", None)
    if ks is not None:
        if not isinstance(ks, list) or not all(isinstance(k, int) for k in ks):
            raise ConfigError("[self_train] base_ks must be a list of ints")
        ks = tuple(ks)
    try:
        return SelfTrainParams(
            base_ks=ks if ks is not None else base.base_ks,
            agreement_tol=_typed(doc, "self_train", "agreement_tol", float, None),
            max_rounds=_typed(doc, "self_train", "max_rounds", int, base.max_rounds),
        )
    except DataError as exc:
        raise ConfigError(f"[self_train] {exc}") from exc


def parse_experiment_config(doc: dict, **overrides) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a parsed document plus overrides."""
    models = doc.get("experiment", {}).get("models", None)
    if models is not None:
        if not isinstance(models, list) or not all(isinstance(m, str) for m in models):
            raise ConfigError("[experiment] models must be a list of strings")
        models = tuple(models)
    dataset = overrides.pop("dataset", None) or _typed(doc, "experiment", "dataset", str, None)
    schema = overrides.pop("schema", None) or _typed(doc, "experiment", "schema", str, None)
    if dataset is None:
        raise ConfigError("[experiment] dataset path is required")
    if schema is None:
        raise ConfigError("[experiment] schema path is required")
    kwargs = dict(
        dataset=dataset,
        schema=schema,
        output_dir=_typed(doc, "experiment", "output_dir", str, "out"),
        models=models if models is not None else MODEL_IDS,
        histogram_bins=_typed(doc, "experiment", "histogram_bins", int, 20),
        folds=_typed(doc, "split", "folds", int, 10),
        unlabeled_ratio=_typed(doc, "split", "unlabeled_ratio", float, 0.8),
        budget_ur=_typed(doc, "split", "budget_ur", float, None),
        seed=_typed(doc, "split", "seed", int, 0),
        smogn=_smogn_params(doc),
        coreg=_coreg_params(doc),
        self_train=_self_train_params(doc),
    )
    for key, value in overrides.items():
        if value is not None:
            kwargs[key] = value
    try:
        return ExperimentConfig(**kwargs)
    except DataError as exc:
        raise ConfigError(str(exc)) from exc


def parse_synth_spec(doc: dict, **overrides) -> SynthSpec:
    section = doc.get("synth", {})
    kind = _typed(doc, "synth", "target", str, "mixture")
    if kind == "mixture":
        base = MixtureTarget()
        weights = section.get("weights", base.weights)
        means = section.get("means", base.means)
        sds = section.get("sds", base.sds)
        try:
            target = MixtureTarget(
                weights=tuple(float(w) for w in weights),
                means=tuple(float(m) for m in means),
                sds=tuple(float(s) for s in sds),
                transition=_typed(doc, "synth", "transition", float, base.transition),
            )
        except DataError as exc:
            raise ConfigError(f"[synth] {exc}") from exc
    elif kind == "function":
        try:
            target = FunctionTarget(noise_sd=_typed(doc, "synth", "noise_sd", float, 0.02))
        except DataError as exc:
            raise ConfigError(f"[synth] {exc}") from exc
    else:
        raise ConfigError(f"[synth] unknown target model {kind!r}")
    cards = section.get("nominal_cardinalities", ())
    kwargs = dict(
        n=_typed(doc, "synth", "n", int, 1000),
        numeric_features=_typed(doc, "synth", "numeric_features", int, 3),
        nominal_cardinalities=tuple(int(c) for c in cards),
        target_model=target,
        rare_fraction=_typed(doc, "synth", "rare_fraction", float, 0.1),
        seed=_typed(doc, "synth", "seed", int, 0),
    )
    for key, value in overrides.items():
        if value is not None:
            kwargs[key] = value
    try:
        return SynthSpec(**kwargs)
    except DataError as exc:
        raise ConfigError(f"[synth] {exc}") from exc


# ---------------------------------------------------------------------------
# experiment execution
# ---------------------------------------------------------------------------


@dataclass
class FoldAudit:
    fold: int
    test_ids: frozenset
    train_input_ids: frozenset


@dataclass
class RunReport:
    config: dict
    fold_metrics: dict  # model -> list of per-fold metric dicts
    summary: dict  # model -> metric -> {"mean", "sd"}
    histogram: list | None
    audits: list
    leakage_free: bool

    def to_json_doc(self) -> dict:
        return {
            "config": self.config,
            "models": {
                model: {"folds": self.fold_metrics[model], "summary": self.summary[model]}
                for model in self.fold_metrics
            },
            "histogram": self.histogram,
            "leakage_free": self.leakage_free,
            "versions": {"package": __version__},
        }


def emit_histogram(before: np.ndarray, after: np.ndarray, bins: int) -> list[dict]:
    """Shared equal-width histogram rows for two target vectors."""
    before = np.asarray(before, dtype=float)
    after = np.asarray(after, dtype=float)
    lo = float(min(before.min(), after.min()))
    hi = float(max(before.max(), after.max()))
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    count_before, _ = np.histogram(before, bins=edges)
    count_after, _ = np.histogram(after, bins=edges)
    return [
        {
            "bin_low": float(edges[i]),
            "bin_high": float(edges[i + 1]),
            "count_before": int(count_before[i]),
            "count_after": int(count_after[i]),
        }
        for i in range(bins)
    ]


def _mask_fold(train: Dataset, cfg: ExperimentConfig, fold: int):
    """Split one training fold into labeled L and target-masked U.

    Plain mode masks ``unlabeled_ratio`` of the whole fold.  With
    ``budget_ur`` set, the labeled count is pinned to the budget that ratio
    implies — ``round((1 - budget_ur)·|fold|)`` — and ``unlabeled_ratio``
    only decides how much extra data joins as unlabeled: the training input
    is a seeded subsample of size ``round(budget/(1 - ur))`` and the rest of
    the fold goes unused.  This keeps the labeled budget comparable across a
    ratio sweep, so differences measure the value of unlabeled data rather
    than the loss of labeled data.
    """
    if cfg.budget_ur is None:
        mask_seed = child_seed(cfg.seed, "mask", fold)
        spec = SplitSpec(unlabeled_ratio=cfg.unlabeled_ratio, folds=cfg.folds, seed=mask_seed)
        return split_labeled(train, spec)
    n = len(train)
    budget = int(round((1.0 - cfg.budget_ur) * n))
    if budget < 1:
        raise ConfigError(f"budget_ur={cfg.budget_ur} leaves no labeled instances in a fold of {n}")
    t = min(n, int(round(budget / (1.0 - cfg.unlabeled_ratio))))
    # one ratio-independent permutation: the labeled prefix is identical for
    # every swept ratio and the unlabeled sets are nested supersets
    perm = child_rng(cfg.seed, "subsample", fold).permutation(n)
    labeled = train.take(np.sort(perm[:budget]))
    unlabeled = train.take(np.sort(perm[budget:t]))
    return labeled, unlabeled.relabeled(np.full(len(unlabeled), np.nan))


def _fit_predict(model_id, L, U, test, cfg: ExperimentConfig, fold: int):
    """Train one model on (L, U) and predict the test fold.

    Returns (predictions, extra_train_ids) where extra_train_ids covers
    instances synthesised or pseudo-labeled beyond L and U themselves.
    """
    extra: set[int] = set()
    if model_id in ("knn4", "knn7", "knn9"):
        m = knn_baseline(L, k=int(model_id[3:]))
        return knn_predict_rows(m, test), extra
    if model_id == "lr":
        m = fit_linear(L)
        return predict_linear_rows(m, test), extra
    if model_id == "mssra-knn":
        m = self_train_mssra(L, U, cfg.self_train)
        return self_train_predict_rows(m, test), extra
    if model_id == "coreg":
        params = replace(cfg.coreg, seed=child_seed(cfg.seed, "coreg", fold))
        m = coreg_train(L, U, params)
        preds = (knn_predict_rows(m.learner1, test) + knn_predict_rows(m.learner2, test)) / 2.0
        extra |= {int(i) for i in m.learner1.reference.ids} | {int(i) for i in m.learner2.reference.ids}
        return preds, extra
    if model_id == "smogn-coreg":
        sparams = replace(cfg.smogn, seed=child_seed(cfg.seed, "smogn", fold))
        resampled, _records = smogn(L, sparams)
        cparams = replace(cfg.coreg, seed=child_seed(cfg.seed, "smogn-coreg", fold))
        m = coreg_train(resampled, U, cparams)
        preds = (knn_predict_rows(m.learner1, test) + knn_predict_rows(m.learner2, test)) / 2.0
        extra |= {int(i) for i in resampled.ids}
        extra |= {int(i) for i in m.learner1.reference.ids} | {int(i) for i in m.learner2.reference.ids}
        return preds, extra
    raise ConfigError(f"unknown model id {model_id!r}")


def _aggregate(fold_values: list) -> dict:
    defined = [v for v in fold_values if v is not None]
    if not defined:
        return {"mean": None, "sd": None}
    arr = np.asarray(defined, dtype=float)
    return {"mean": float(arr.mean()), "sd": float(arr.std())}


def run_experiment(cfg: ExperimentConfig, dataset: Dataset | None = None, write: bool = True) -> RunReport:
    """Run the full cross-validated comparison described by ``cfg``."""
    started = time.time()
    if dataset is None:
        dataset = load_csv(cfg.dataset, Schema.from_json_file(cfg.schema))
    if not np.all(dataset.labeled_mask):
        raise DataError("experiment datasets must be fully labeled (masking is done per fold)")

    folds = kfold(dataset, SplitSpec(folds=cfg.folds, seed=child_seed(cfg.seed, "folds")))
    fold_metrics: dict = {m: [] for m in cfg.models}
    audits: list[FoldAudit] = []
    histogram = None

    for i, (train, test) in enumerate(folds):
        L, U = _mask_fold(train, cfg, i)
        train_input_ids = {int(x) for x in L.ids} | {int(x) for x in U.ids}
        for model_id in cfg.models:
            preds, extra = _fit_predict(model_id, L, U, test, cfg, i)
            train_input_ids |= extra
            report = evaluate(test.y, np.asarray(preds, dtype=float))
            fold_metrics[model_id].append(report.to_dict())
            if model_id == "smogn-coreg" and i == 0 and histogram is None:
                sparams = replace(cfg.smogn, seed=child_seed(cfg.seed, "smogn", i))
                resampled, _ = smogn(L, sparams)
                histogram = emit_histogram(L.y, resampled.y, cfg.histogram_bins)
        audits.append(
            FoldAudit(
                fold=i,
                test_ids=frozenset(int(x) for x in test.ids),
                train_input_ids=frozenset(train_input_ids),
            )
        )

    summary = {
        model: {
            key: _aggregate([fm[key] for fm in fold_metrics[model]])
            for key in METRIC_KEYS
        }
        for model in cfg.models
    }
    leakage_free = all(not (a.test_ids & a.train_input_ids) for a in audits)
    report = RunReport(
        config=_config_echo(cfg),
        fold_metrics=dict(fold_metrics),
        summary=summary,
        histogram=histogram,
        audits=audits,
        leakage_free=leakage_free,
    )
    log.info("experiment finished in %.1fs (models=%s)", time.time() - started, list(cfg.models))
    if write:
        write_outputs(report, cfg)
    return report


def _config_echo(cfg: ExperimentConfig) -> dict:
    doc = dataclasses.asdict(cfg)
    doc["models"] = list(cfg.models)
    return doc


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_outputs(report: RunReport, cfg: ExperimentConfig) -> None:
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, "report.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_doc(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    n_folds = cfg.folds
    for key in METRIC_KEYS:
        with open(os.path.join(cfg.output_dir, f"table_{key}.csv"), "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["model"] + [f"fold_{i}" for i in range(n_folds)] + ["mean", "sd"])
            for model in report.fold_metrics:
                vals = [fm[key] for fm in report.fold_metrics[model]]
                agg = report.summary[model][key]
                writer.writerow([model] + [_fmt(v) for v in vals] + [_fmt(agg["mean"]), _fmt(agg["sd"])])
    if report.histogram is not None:
        with open(os.path.join(cfg.output_dir, "histogram.csv"), "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["bin_low", "bin_high", "count_before", "count_after"])
            for row in report.histogram:
                writer.writerow(
                    [_fmt(row["bin_low"]), _fmt(row["bin_high"]), row["count_before"], row["count_after"]]
                )


def sweep_ur(cfg: ExperimentConfig, urs, dataset: Dataset | None = None, write: bool = True) -> dict:
    """Re-run the experiment at several unlabeled ratios with a shared root seed.

    Fold membership depends only on the root seed, so every ratio sees the
    identical folds, and unless the config pins its own ``budget_ur`` the
    labeled budget is anchored at the highest swept ratio — every sweep point
    trains on the same-sized labeled set and only the amount of unlabeled
    data varies.  Returns ``{ur: RunReport}`` and writes a tidy
    ``ur_sweep.csv`` (ur, model, metric, mean, sd).
    """
    urs = list(urs)
    if not urs:
        raise ConfigError("sweep needs at least one unlabeled ratio")
    anchor = cfg.budget_ur if cfg.budget_ur is not None else float(max(urs))
    reports = {}
    for ur in urs:
        sub = replace(
            cfg,
            unlabeled_ratio=float(ur),
            budget_ur=anchor,
            output_dir=os.path.join(cfg.output_dir, f"ur_{ur}"),
        )
        reports[float(ur)] = run_experiment(sub, dataset=dataset, write=write)
    if write:
        os.makedirs(cfg.output_dir, exist_ok=True)
        with open(os.path.join(cfg.output_dir, "ur_sweep.csv"), "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["ur", "model", "metric", "mean", "sd"])
            for ur in (float(u) for u in urs):
                rep = reports[ur]
                for model in rep.fold_metrics:
                    for key in METRIC_KEYS:
                        agg = rep.summary[model][key]
                        writer.writerow([_fmt(ur), model, key, _fmt(agg["mean"]), _fmt(agg["sd"])])
    return reports
