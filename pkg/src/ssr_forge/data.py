"""Typed dataset container, CSV I/O, and deterministic splitting.

A :class:`Dataset` couples a :class:`Schema` (ordered numeric/nominal feature
columns plus one numeric target) with column-major numpy storage.  Targets may
be missing (masked) to model partially labeled data; feature values may not.
Missing targets are stored as NaN internally and written as empty cells.

All randomness in the package flows through :func:`child_seed` /
:func:`child_rng`: a single root seed is stretched into independent child
streams keyed by a purpose label and an integer index, so that adding a new
consumer of randomness never perturbs existing ones.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

KIND_NUMERIC = "numeric"
KIND_NOMINAL = "nominal"

#: Tokens that mark a missing target cell in CSV files.
MISSING_TOKENS = ("", "?")


class DataError(ValueError):
    """Raised for malformed input data (files, schemas, or value domains)."""


# ---------------------------------------------------------------------------
# seeding
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return h


def child_seed(root: int, label: str, index: int = 0) -> int:
    """Derive a decorrelated 64-bit child seed from ``(root, label, index)``.

    The derivation is a fixed splitmix-style hash chain, so child streams are
    reproducible across runs and platforms for a given root seed.
    """
    mixed = _splitmix64((root & _MASK64) ^ _fnv1a64(label))
    return _splitmix64((mixed + index) & _MASK64)


def child_rng(root: int, label: str, index: int = 0) -> np.random.Generator:
    """Deterministic numpy generator for one purpose-labeled child stream."""
    return np.random.default_rng(child_seed(root, label, index))


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Schema:
    """Ordered column layout: feature columns, one target, optional id column.

    ``columns`` lists every CSV column as ``(name, kind)`` pairs in file
    order.  The target must be numeric.  An id column, when named, is carried
    through round trips but never treated as a feature.
    """

    columns: tuple[tuple[str, str], ...]
    target: str
    id_column: str | None = None

    def __post_init__(self) -> None:
        names = [name for name, _ in self.columns]
        if len(names) != len(set(names)):
            raise DataError("schema column names must be unique")
        kinds = {kind for _, kind in self.columns}
        bad = kinds - {KIND_NUMERIC, KIND_NOMINAL}
        if bad:
            raise DataError(f"unknown column kind(s): {sorted(bad)}")
        if self.target not in names:
            raise DataError("target column not found in schema")
        if dict(self.columns)[self.target] != KIND_NUMERIC:
            raise DataError(f"target column {self.target!r} must be numeric")
        if self.id_column is not None:
            if self.id_column not in names:
                raise DataError(f"id column {self.id_column!r} not in schema")
            if self.id_column == self.target:
                raise DataError("id column cannot be the target")

    @property
    def feature_columns(self) -> tuple[tuple[str, str], ...]:
        skip = {self.target, self.id_column}
        return tuple((n, k) for n, k in self.columns if n not in skip)

    @property
    def numeric_features(self) -> tuple[str, ...]:
        return tuple(n for n, k in self.feature_columns if k == KIND_NUMERIC)

    @property
    def nominal_features(self) -> tuple[str, ...]:
        return tuple(n for n, k in self.feature_columns if k == KIND_NOMINAL)

    def to_json_file(self, path: str) -> None:
        doc = {
            "columns": [{"name": n, "kind": k} for n, k in self.columns],
            "target": self.target,
        }
        if self.id_column is not None:
            doc["id"] = self.id_column
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_json_file(cls, path: str) -> "Schema":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"schema file {path}: invalid JSON ({exc})") from exc
        try:
            columns = tuple((c["name"], c["kind"]) for c in doc["columns"])
            return cls(columns=columns, target=doc["target"], id_column=doc.get("id"))
        except (KeyError, TypeError) as exc:
            raise DataError(f"schema file {path}: malformed document") from exc


# ---------------------------------------------------------------------------
# instances and datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Instance:
    """A single row: split feature views, target (None when missing), identity."""

    numeric: tuple[float, ...]
    nominal: tuple[str, ...]
    target: float | None
    uid: int | None = None


class Dataset:
    """Immutable-by-convention table of instances with a shared schema.

    Feature storage is column-major and split by kind: ``numeric`` is an
    ``(n, #numeric)`` float array, ``nominal`` an ``(n, #nominal)`` object
    array of category tokens.  ``y`` holds targets with NaN for missing.
    ``ids`` give each instance a stable identity that survives subsetting,
    so disjointness audits compare ids rather than values.
    """

    __slots__ = ("schema", "numeric", "nominal", "y", "ids", "row_labels", "provenance")

    def __init__(
        self,
        schema: Schema,
        numeric: np.ndarray,
        nominal: np.ndarray,
        y: np.ndarray,
        ids: np.ndarray | None = None,
        row_labels: np.ndarray | None = None,
        provenance: str = "",
    ) -> None:
        n = len(y)
        numeric = np.asarray(numeric, dtype=float)
        nominal = np.asarray(nominal, dtype=object)
        if numeric.ndim != 2:
            # a zero-row buffer has no inferable width; take the schema's
            width = -1 if n else len(schema.numeric_features)
            numeric = numeric.reshape(n, width)
        if nominal.ndim != 2:
            width = -1 if n else len(schema.nominal_features)
            nominal = nominal.reshape(n, width)
        if numeric.shape[1] != len(schema.numeric_features):
            raise DataError("numeric feature matrix width does not match schema")
        if nominal.shape[1] != len(schema.nominal_features):
            raise DataError("nominal feature matrix width does not match schema")
        if not np.all(np.isfinite(numeric)):
            raise DataError("numeric features must be finite (no NaN/inf)")
        if ids is None:
            ids = np.arange(n, dtype=np.int64)
        ids = np.asarray(ids, dtype=np.int64)
        if ids.shape != (n,):
            raise DataError("ids must be one per instance")
        self.schema = schema
        self.numeric = numeric
        self.nominal = nominal
        self.y = np.asarray(y, dtype=float).reshape(n)
        self.ids = ids
        self.row_labels = row_labels
        self.provenance = provenance

    # -- basic views --------------------------------------------------------

    def __len__(self) -> int:
        return len(self.y)

    @property
    def labeled_mask(self) -> np.ndarray:
        return ~np.isnan(self.y)

    def instance(self, i: int) -> Instance:
        t = self.y[i]
        return Instance(
            numeric=tuple(float(v) for v in self.numeric[i]),
            nominal=tuple(self.nominal[i]),
            target=None if math.isnan(t) else float(t),
            uid=int(self.ids[i]),
        )

    def instances(self) -> list[Instance]:
        return [self.instance(i) for i in range(len(self))]

    # -- derived datasets ---------------------------------------------------

    def take(self, indices, provenance: str | None = None) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        labels = None if self.row_labels is None else self.row_labels[idx]
        return Dataset(
            self.schema,
            self.numeric[idx],
            self.nominal[idx],
            self.y[idx],
            ids=self.ids[idx],
            row_labels=labels,
            provenance=self.provenance if provenance is None else provenance,
        )

    def labeled(self) -> "Dataset":
        return self.take(np.flatnonzero(self.labeled_mask))

    def unlabeled(self) -> "Dataset":
        return self.take(np.flatnonzero(~self.labeled_mask))

    def relabeled(self, y_new: np.ndarray) -> "Dataset":
        """Copy with targets replaced (used to attach pseudo-labels)."""
        y_new = np.asarray(y_new, dtype=float).reshape(len(self))
        return Dataset(
            self.schema,
            self.numeric,
            self.nominal,
            y_new,
            ids=self.ids,
            row_labels=self.row_labels,
            provenance=self.provenance,
        )

    def concat(self, other: "Dataset", provenance: str | None = None) -> "Dataset":
        if other.schema != self.schema:
            raise DataError("cannot concatenate datasets with different schemas")
        merged = np.concatenate([self.ids, other.ids])
        if len(np.unique(merged)) != len(merged):
            raise DataError("cannot concatenate datasets with overlapping instance ids")
        labels = None
        if self.row_labels is not None and other.row_labels is not None:
            labels = np.concatenate([self.row_labels, other.row_labels])
        return Dataset(
            self.schema,
            np.concatenate([self.numeric, other.numeric]),
            np.concatenate([self.nominal, other.nominal]),
            np.concatenate([self.y, other.y]),
            ids=merged,
            row_labels=labels,
            provenance=self.provenance if provenance is None else provenance,
        )


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------


def load_csv(path: str, schema: Schema) -> Dataset:
    """Read an RFC-4180 CSV with a header row into a dataset.

    The header must contain exactly the schema's columns (any order).  Empty
    cells and ``?`` mark missing targets; missing feature values are rejected.
    Errors name the offending physical row and column.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty (header row required)") from None
        if len(header) != len(set(header)):
            dupes = sorted({h for h in header if header.count(h) > 1})
            raise DataError(f"{path}: duplicate header column(s): {dupes}")
        if schema.target not in header:
            raise DataError(f"{path}: target column not found in header")
        wanted = [name for name, _ in schema.columns]
        for name in wanted:
            if name not in header:
                raise DataError(f"{path}: column {name!r} not found in header")
        extra = [h for h in header if h not in wanted]
        if extra:
            raise DataError(f"{path}: unexpected column(s) not in schema: {extra}")

        col_of = {name: header.index(name) for name in wanted}
        num_names = schema.numeric_features
        nom_names = schema.nominal_features

        numeric_rows: list[list[float]] = []
        nominal_rows: list[list[str]] = []
        targets: list[float] = []
        labels: list[str] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {lineno}: expected {len(header)} cells, got {len(row)}"
                )
            num_vals = []
            for name in num_names:
                cell = row[col_of[name]]
                if cell in MISSING_TOKENS:
                    raise DataError(
                        f"{path}: row {lineno}: column {name!r}: missing feature value"
                    )
                try:
                    num_vals.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: row {lineno}: column {name!r}: "
                        f"cannot parse numeric value {cell!r}"
                    ) from None
            nom_vals = []
            for name in nom_names:
                cell = row[col_of[name]]
                if cell in MISSING_TOKENS:
                    raise DataError(
                        f"{path}: row {lineno}: column {name!r}: missing feature value"
                    )
                nom_vals.append(cell)
            tcell = row[col_of[schema.target]]
            if tcell in MISSING_TOKENS:
                targets.append(float("nan"))
            else:
                try:
                    targets.append(float(tcell))
                except ValueError:
                    raise DataError(
                        f"{path}: row {lineno}: column {schema.target!r}: "
                        f"cannot parse numeric value {tcell!r}"
                    ) from None
            numeric_rows.append(num_vals)
            nominal_rows.append(nom_vals)
            if schema.id_column is not None:
                labels.append(row[col_of[schema.id_column]])

    n = len(targets)
    return Dataset(
        schema,
        np.array(numeric_rows, dtype=float).reshape(n, len(num_names)),
        np.array(nominal_rows, dtype=object).reshape(n, len(nom_names)),
        np.array(targets, dtype=float),
        row_labels=np.array(labels, dtype=object) if schema.id_column else None,
        provenance=str(path),
    )


def write_csv(dataset: Dataset, path: str) -> None:
    """Write a dataset back to CSV in schema column order (round-trip safe)."""
    schema = dataset.schema
    num_idx = {n: i for i, n in enumerate(schema.numeric_features)}
    nom_idx = {n: i for i, n in enumerate(schema.nominal_features)}
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([name for name, _ in schema.columns])
        for i in range(len(dataset)):
            row = []
            for name, kind in schema.columns:
                if name == schema.target:
                    t = dataset.y[i]
                    row.append("" if math.isnan(t) else repr(float(t)))
                elif name == schema.id_column:
                    if dataset.row_labels is not None:
                        row.append(str(dataset.row_labels[i]))
                    else:
                        row.append(str(int(dataset.ids[i])))
                elif kind == KIND_NUMERIC:
                    row.append(repr(float(dataset.numeric[i, num_idx[name]])))
                else:
                    row.append(str(dataset.nominal[i, nom_idx[name]]))
            writer.writerow(row)


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    """Protocol knobs for label masking and cross-validation folds."""

    unlabeled_ratio: float = 0.8
    folds: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.unlabeled_ratio < 1.0:
            raise DataError("unlabeled_ratio must lie in [0, 1)")
        if self.folds < 2:
            raise DataError("folds must be at least 2")


def split_labeled(d: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Mask targets of a uniformly chosen subset, returning (labeled, unlabeled).

    The unlabeled part has ``round(unlabeled_ratio * len(d))`` instances
    (half-up rounding); both parts preserve original row order.  The choice
    is a pure function of ``spec.seed``.
    """
    if not np.all(d.labeled_mask):
        raise DataError("split_labeled requires a fully labeled dataset")
    n = len(d)
    n_unlabeled = int(math.floor(spec.unlabeled_ratio * n + 0.5))
    rng = child_rng(spec.seed, "split-labeled")
    chosen = rng.permutation(n)[:n_unlabeled]
    mask = np.zeros(n, dtype=bool)
    mask[chosen] = True
    unlabeled = d.take(np.flatnonzero(mask))
    unlabeled = unlabeled.relabeled(np.full(len(unlabeled), np.nan))
    labeled = d.take(np.flatnonzero(~mask))
    return labeled, unlabeled


def kfold(d: Dataset, spec: SplitSpec) -> list[tuple[Dataset, Dataset]]:
    """Shuffled k-fold partition as (train, test) pairs.

    Folds are disjoint, cover the dataset, and differ in size by at most one
    (the first ``n % k`` folds take the extra instance).
    """
    n, k = len(d), spec.folds
    if k > n:
        raise DataError(f"cannot make {k} folds from {n} instances")
    order = child_rng(spec.seed, "kfold").permutation(n)
    base, extra = divmod(n, k)
    out = []
    start = 0
    for fold in range(k):
        size = base + (1 if fold < extra else 0)
        test_idx = np.sort(order[start : start + size])
        train_idx = np.sort(np.concatenate([order[:start], order[start + size :]]))
        out.append((d.take(train_idx), d.take(test_idx)))
        start += size
    return out
