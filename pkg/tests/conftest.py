"""Shared fixtures: schema/dataset builders used across the test modules."""

import numpy as np
import pytest

from ssr_forge import Dataset, Schema


def build_schema(n_numeric=2, n_nominal=0, with_id=False):
    cols = [("id", "numeric")] if with_id else []
    cols += [(f"x{i + 1}", "numeric") for i in range(n_numeric)]
    cols += [(f"g{j + 1}", "nominal") for j in range(n_nominal)]
    cols.append(("y", "numeric"))
    return Schema(
        columns=tuple(cols), target="y", id_column="id" if with_id else None
    )


def build_dataset(numeric, nominal=None, y=None, ids=None, schema=None):
    numeric = np.asarray(numeric, dtype=float)
    if numeric.ndim == 1:
        numeric = numeric.reshape(-1, 1)
    n = len(numeric)
    if nominal is None:
        nominal = np.empty((n, 0), dtype=object)
    else:
        nominal = np.asarray(nominal, dtype=object)
        if nominal.ndim == 1:
            nominal = nominal.reshape(-1, 1)
    if y is None:
        y = np.zeros(n)
    if schema is None:
        schema = build_schema(numeric.shape[1], nominal.shape[1])
    return Dataset(schema, numeric, nominal, np.asarray(y, dtype=float), ids=ids)


@pytest.fixture
def make_dataset():
    return build_dataset


@pytest.fixture
def make_schema():
    return build_schema


@pytest.fixture
def random_mixed_dataset():
    """Factory for a reproducible dataset with numeric + nominal features."""

    def _make(n=30, n_numeric=2, n_nominal=1, seed=7, cardinality=3):
        rng = np.random.default_rng(seed)
        numeric = rng.normal(size=(n, n_numeric))
        nominal = np.empty((n, n_nominal), dtype=object)
        for j in range(n_nominal):
            nominal[:, j] = np.array(
                [f"t{v}" for v in rng.integers(cardinality, size=n)], dtype=object
            )
        y = rng.random(n)
        return build_dataset(numeric, nominal, y)

    return _make
