"""Supervised baselines and the agreement-driven self-training ensemble."""

import numpy as np
import pytest

from ssr_forge import (
    DataError,
    Dataset,
    Instance,
    SelfTrainParams,
    fit_linear,
    knn_baseline,
    knn_predict_rows,
    predict_linear,
    predict_linear_rows,
    self_train_mssra,
    self_train_predict_rows,
)

from conftest import build_dataset, build_schema


# --- linear model ----------------------------------------------------------


def test_exact_line_recovered():
    x = np.linspace(0.0, 1.0, 12)
    d = build_dataset(x.reshape(-1, 1), y=1.0 + 2.0 * x)
    model = fit_linear(d)
    assert model.intercept == pytest.approx(1.0, abs=1e-9)
    assert model.coefficients[0] == pytest.approx(2.0, abs=1e-9)
    assert not model.ridge_fallback
    preds = predict_linear_rows(model, d)
    assert np.allclose(preds, d.y, atol=1e-9)


def test_constant_target_gives_flat_model():
    rng = np.random.default_rng(2)
    d = build_dataset(rng.random((20, 2)), y=np.full(20, 3.5), schema=build_schema(2))
    model = fit_linear(d)
    assert model.intercept == pytest.approx(3.5, abs=1e-8)
    assert np.allclose(model.coefficients, 0.0, atol=1e-8)


def test_normal_equations_oracle_mixed_features():
    rng = np.random.default_rng(9)
    n = 60
    numeric = rng.random((n, 2))
    nominal = np.array([f"c{v}" for v in rng.integers(3, size=n)], dtype=object)
    y = rng.random(n)
    d = build_dataset(numeric, nominal, y, schema=build_schema(2, 1))
    model = fit_linear(d)

    # independent design build: intercept, numerics, drop-first dummies c1, c2
    design = np.hstack(
        [
            np.ones((n, 1)),
            numeric,
            (nominal == "c1").astype(float).reshape(-1, 1),
            (nominal == "c2").astype(float).reshape(-1, 1),
        ]
    )
    beta = np.linalg.solve(design.T @ design, design.T @ y)
    assert model.intercept == pytest.approx(beta[0], abs=1e-6)
    assert np.allclose(model.coefficients, beta[1:], atol=1e-6)
    assert np.allclose(predict_linear_rows(model, d), design @ beta, atol=1e-6)


def test_scalar_and_batch_prediction_agree():
    rng = np.random.default_rng(4)
    d = build_dataset(
        rng.random((30, 2)),
        np.array([f"c{v}" for v in rng.integers(3, size=30)], dtype=object),
        rng.random(30),
        schema=build_schema(2, 1),
    )
    model = fit_linear(d)
    batch = predict_linear_rows(model, d)
    for i in range(len(d)):
        assert predict_linear(model, d.instance(i)) == pytest.approx(batch[i], abs=1e-12)


def test_unseen_category_contributes_nothing():
    rng = np.random.default_rng(1)
    d = build_dataset(
        rng.random((25, 1)),
        np.array(["a"] * 13 + ["b"] * 12, dtype=object),
        rng.random(25),
        schema=build_schema(1, 1),
    )
    model = fit_linear(d)
    base = Instance(numeric=(0.5,), nominal=("a",), target=None)  # dropped category
    novel = Instance(numeric=(0.5,), nominal=("zzz",), target=None)
    assert predict_linear(model, novel) == pytest.approx(predict_linear(model, base))


def test_rank_deficient_design_uses_ridge():
    x = np.linspace(0.0, 1.0, 15)
    d = build_dataset(np.column_stack([x, x]), y=3.0 * x, schema=build_schema(2))
    model = fit_linear(d)
    assert model.ridge_fallback
    preds = predict_linear_rows(model, d)
    assert np.allclose(preds, 3.0 * x, atol=1e-4)
    # the duplicated feature splits the weight evenly under the penalty
    assert model.coefficients[0] == pytest.approx(model.coefficients[1], abs=1e-6)


def test_too_few_rows_rejected():
    d = build_dataset(np.random.default_rng(0).random((3, 2)), y=np.ones(3), schema=build_schema(2))
    with pytest.raises(DataError, match="need at least 4 labeled instances"):
        fit_linear(d)


def test_linear_fit_requires_labels():
    d = build_dataset([[0.0], [1.0]], y=[1.0, np.nan])
    with pytest.raises(DataError, match="fully labeled"):
        fit_linear(d)


# --- k-NN baseline ---------------------------------------------------------


def test_knn_with_k_equal_n_predicts_global_mean():
    d = build_dataset([[0.0], [1.0], [2.0], [3.0]], y=[1.0, 2.0, 3.0, 6.0])
    model = knn_baseline(d, k=4)
    queries = build_dataset([[0.1], [2.9]], y=[0.0, 0.0], ids=[50, 51])
    preds = knn_predict_rows(model, queries)
    assert np.allclose(preds, 3.0)


def test_knn_baseline_interpolates_locally():
    x = np.linspace(0.0, 1.0, 21)
    d = build_dataset(x.reshape(-1, 1), y=x * 10)
    model = knn_baseline(d, k=1)
    q = build_dataset([[0.249]], y=[0.0], ids=[100])
    assert knn_predict_rows(model, q)[0] == pytest.approx(2.5)  # nearest is x=0.25


# --- self-training ensemble ------------------------------------------------


def _semi(n_l=30, n_u=40, seed=0):
    rng = np.random.default_rng(seed)
    schema = build_schema(1)

    def block(n, base):
        x = rng.random(n)
        return Dataset(
            schema, x.reshape(-1, 1), np.empty((n, 0), dtype=object),
            0.5 + 0.3 * np.sin(2 * np.pi * x) + rng.normal(0, 0.03, n),
            ids=np.arange(base, base + n),
        )

    labeled = block(n_l, 0)
    unlabeled = block(n_u, 1000).relabeled(np.full(n_u, np.nan))
    return labeled, unlabeled


def test_selftrain_params_validation():
    with pytest.raises(DataError, match="base_ks"):
        SelfTrainParams(base_ks=())
    with pytest.raises(DataError, match="base_ks"):
        SelfTrainParams(base_ks=(3, 0))
    with pytest.raises(DataError, match="agreement_tol"):
        SelfTrainParams(agreement_tol=-0.1)
    with pytest.raises(DataError, match="max_rounds"):
        SelfTrainParams(max_rounds=0)


def test_zero_tolerance_adopts_nothing():
    labeled, unlabeled = _semi()
    model = self_train_mssra(labeled, unlabeled, SelfTrainParams(agreement_tol=0.0))
    assert model.pseudo_labeled == 0
    assert model.rounds_run == 1  # one look, no agreement, stop
    assert all(len(b.reference) == len(labeled) for b in model.base_models)


def test_infinite_tolerance_absorbs_everything_in_one_round():
    labeled, unlabeled = _semi()
    model = self_train_mssra(labeled, unlabeled, SelfTrainParams(agreement_tol=np.inf))
    assert model.pseudo_labeled == len(unlabeled)
    assert model.rounds_run == 1
    assert all(len(b.reference) == len(labeled) + len(unlabeled) for b in model.base_models)


def test_default_tolerance_is_five_percent_of_range():
    labeled, unlabeled = _semi()
    model = self_train_mssra(labeled, unlabeled)
    expect = 0.05 * float(labeled.y.max() - labeled.y.min())
    assert model.tolerance == pytest.approx(expect)


def test_rounds_and_growth_bounds():
    labeled, unlabeled = _semi(seed=3)
    params = SelfTrainParams(agreement_tol=0.02, max_rounds=4)
    model = self_train_mssra(labeled, unlabeled, params)
    assert model.rounds_run <= 4
    assert 0 <= model.pseudo_labeled <= len(unlabeled)
    for b in model.base_models:
        assert len(b.reference) == len(labeled) + model.pseudo_labeled


def test_empty_unlabeled_set_is_a_noop():
    labeled, unlabeled = _semi()
    empty = unlabeled.take(np.array([], dtype=np.int64))
    model = self_train_mssra(labeled, empty)
    assert model.rounds_run == 0
    assert model.pseudo_labeled == 0


def test_base_ks_respected():
    labeled, unlabeled = _semi()
    model = self_train_mssra(labeled, unlabeled, SelfTrainParams(base_ks=(2, 5)))
    assert tuple(b.k for b in model.base_models) == (2, 5)


def test_prediction_is_mean_of_bases():
    labeled, unlabeled = _semi(seed=7)
    model = self_train_mssra(labeled, unlabeled, SelfTrainParams(agreement_tol=np.inf))
    grid = build_dataset(
        np.linspace(0, 1, 7).reshape(-1, 1), y=np.zeros(7), ids=np.arange(5000, 5007)
    )
    preds = self_train_predict_rows(model, grid)
    expect = np.mean([knn_predict_rows(b, grid) for b in model.base_models], axis=0)
    assert np.allclose(preds, expect, atol=1e-14)


def test_selftrain_validation():
    labeled, unlabeled = _semi(n_l=5)
    with pytest.raises(DataError, match="cannot support k=9"):
        self_train_mssra(labeled, unlabeled)
    big_l, _ = _semi(n_l=30)
    with pytest.raises(DataError, match="fully labeled"):
        self_train_mssra(unlabeled, unlabeled)
    other = build_dataset(np.zeros((3, 2)), y=np.full(3, np.nan), schema=build_schema(2))
    with pytest.raises(DataError, match="share a schema"):
        self_train_mssra(big_l, other)


def test_selftrain_improves_over_single_small_k_model():
    """With scarce labels and plenty of structure, the grown ensemble should
    not be worse than its own zero-round version on held-out data."""
    labeled, unlabeled = _semi(n_l=15, n_u=120, seed=5)
    rng = np.random.default_rng(123)
    x = rng.random(150)
    test = Dataset(
        labeled.schema, x.reshape(-1, 1), np.empty((150, 0), dtype=object),
        0.5 + 0.3 * np.sin(2 * np.pi * x), ids=np.arange(9000, 9150),
    )
    grown = self_train_mssra(labeled, unlabeled, SelfTrainParams(base_ks=(3, 5, 7)))
    frozen = self_train_mssra(
        labeled, unlabeled.take(np.array([], dtype=np.int64)),
        SelfTrainParams(base_ks=(3, 5, 7)),
    )
    err_grown = float(np.mean((self_train_predict_rows(grown, test) - test.y) ** 2))
    err_frozen = float(np.mean((self_train_predict_rows(frozen, test) - test.y) ** 2))
    assert err_grown <= err_frozen * 1.5  # pseudo-labels must not wreck the fit
