"""Relevance-driven resampling and co-training for semi-supervised regression.

The package bundles:

* a small tabular data layer with schema-aware CSV I/O and deterministic
  seeded splitting (:mod:`ssr_forge.data`),
* heterogeneous Minkowski distances and exact k-nearest-neighbour models
  (:mod:`ssr_forge.distance`),
* a monotone piecewise-cubic target relevance function and rare/normal bin
  partitioning (:mod:`ssr_forge.relevance`),
* SMOGN-style oversampling of rare target ranges (:mod:`ssr_forge.smogn`),
* COREG-style two-view co-training regression (:mod:`ssr_forge.coreg`),
* reference baselines (:mod:`ssr_forge.baselines`), regression metrics
  (:mod:`ssr_forge.metrics`), a skewed synthetic benchmark
  (:mod:`ssr_forge.synth`), and a reproducible experiment harness with a CLI
  (:mod:`ssr_forge.runner`, :mod:`ssr_forge.cli`).
"""

__version__ = "0.1.0"

from .baselines import (
    LinearModel,
    SelfTrainModel,
    SelfTrainParams,
    fit_linear,
    knn_baseline,
    predict_linear,
    predict_linear_rows,
    self_train_mssra,
    self_train_predict_rows,
)
from .coreg import (
    CoregModel,
    CoregParams,
    HistoryEntry,
    coreg_predict,
    coreg_train,
    delta_mse,
)
from .data import (
    DataError,
    Dataset,
    Instance,
    Schema,
    SplitSpec,
    child_rng,
    child_seed,
    kfold,
    load_csv,
    split_labeled,
    write_csv,
)
from .distance import (
    DistanceConfig,
    KnnModel,
    distance,
    knn_predict,
    knn_predict_rows,
    knn_query,
)
from .metrics import MetricsReport, evaluate
from .relevance import (
    Bin,
    BinPartition,
    RelevanceFn,
    auto_control_points,
    partition_bins,
)
from .runner import (
    ConfigError,
    ExperimentConfig,
    RunReport,
    emit_histogram,
    parse_experiment_config,
    parse_synth_spec,
    read_config_file,
    run_experiment,
    sweep_ur,
)
from .smogn import (
    METHOD_GAUSS,
    METHOD_ORIGINAL,
    METHOD_SMOTER,
    SYNTHETIC_ID_BASE,
    SmognParams,
    SynthRecord,
    gaussian_perturb,
    partition_for,
    safe_distance,
    smogn,
    smoter_interpolate,
)
from .synth import (
    FunctionTarget,
    MixtureTarget,
    SynthSpec,
    benchmark_phi_points,
    benchmark_smogn_params,
    generate,
    minority_mask,
    skewed_benchmark,
)

__all__ = [
    "Bin",
    "BinPartition",
    "ConfigError",
    "CoregModel",
    "CoregParams",
    "DataError",
    "Dataset",
    "DistanceConfig",
    "ExperimentConfig",
    "FunctionTarget",
    "HistoryEntry",
    "Instance",
    "KnnModel",
    "LinearModel",
    "METHOD_GAUSS",
    "METHOD_ORIGINAL",
    "METHOD_SMOTER",
    "MetricsReport",
    "MixtureTarget",
    "RelevanceFn",
    "RunReport",
    "SYNTHETIC_ID_BASE",
    "Schema",
    "SelfTrainModel",
    "SelfTrainParams",
    "SmognParams",
    "SplitSpec",
    "SynthRecord",
    "SynthSpec",
    "auto_control_points",
    "benchmark_phi_points",
    "benchmark_smogn_params",
    "child_rng",
    "child_seed",
    "coreg_predict",
    "coreg_train",
    "delta_mse",
    "distance",
    "emit_histogram",
    "evaluate",
    "fit_linear",
    "gaussian_perturb",
    "generate",
    "kfold",
    "knn_baseline",
    "knn_predict",
    "knn_predict_rows",
    "knn_query",
    "load_csv",
    "minority_mask",
    "parse_experiment_config",
    "parse_synth_spec",
    "partition_bins",
    "partition_for",
    "predict_linear",
    "predict_linear_rows",
    "read_config_file",
    "run_experiment",
    "safe_distance",
    "self_train_mssra",
    "self_train_predict_rows",
    "skewed_benchmark",
    "smogn",
    "smoter_interpolate",
    "split_labeled",
    "sweep_ur",
    "write_csv",
]
