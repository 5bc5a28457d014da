"""Acceptance suite: one test per release criterion.

Each test prints a short summary line with the measured quantity next to its
pinned bound, so a verbose run doubles as the acceptance report.  The later
criteria exercise the full pipeline on the built-in skewed benchmark; every
cross-validated report they produce is collected and re-audited for
train/test identity leakage at the end.
"""

import json
import math
import time

import numpy as np
import pytest

from ssr_forge import (
    CoregParams,
    Dataset,
    DistanceConfig,
    ExperimentConfig,
    Instance,
    KnnModel,
    RelevanceFn,
    Schema,
    SmognParams,
    auto_control_points,
    benchmark_phi_points,
    benchmark_smogn_params,
    coreg_predict,
    coreg_train,
    delta_mse,
    evaluate,
    gaussian_perturb,
    knn_predict,
    knn_query,
    partition_bins,
    run_experiment,
    skewed_benchmark,
    smogn,
    smoter_interpolate,
    sweep_ur,
)

from conftest import build_dataset, build_schema

#: every cross-validated report produced while running this module
ALL_REPORTS = []

BENCH_MODELS = ("knn4", "knn7", "knn9", "coreg", "smogn-coreg")


def bench_config(seed, **kw):
    defaults = dict(
        dataset="in-memory",
        schema="in-memory",
        models=BENCH_MODELS,
        folds=10,
        unlabeled_ratio=0.8,
        seed=seed,
        smogn=benchmark_smogn_params(),
    )
    defaults.update(kw)
    return ExperimentConfig(**defaults)


# ---------------------------------------------------------------------------
# criterion 1: metric arithmetic against an independent oracle
# ---------------------------------------------------------------------------


def _oracle_metrics(truth, preds):
    n = len(truth)
    mae = math.fsum(abs(p - t) for t, p in zip(truth, preds)) / n
    rss = math.fsum((p - t) ** 2 for t, p in zip(truth, preds))
    rmse = math.sqrt(rss / n)
    mean_t = math.fsum(truth) / n
    mean_p = math.fsum(preds) / n
    tss = math.fsum((t - mean_t) ** 2 for t in truth)
    r2 = None if tss == 0 else 1.0 - rss / tss
    var_p = math.fsum((p - mean_p) ** 2 for p in preds)
    if tss == 0 or var_p == 0:
        pcc = None
    else:
        cov = math.fsum((t - mean_t) * (p - mean_p) for t, p in zip(truth, preds))
        pcc = max(-1.0, min(1.0, cov / math.sqrt(tss * var_p)))
    return mae, rmse, r2, pcc


def test_criterion_01_metric_oracle_equivalence():
    started = time.monotonic()
    rng = np.random.default_rng(20240103)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 1001))
        truth = rng.normal(0.0, 10.0, n)
        preds = truth + rng.normal(0.0, rng.uniform(0.01, 5.0), n)
        r = evaluate(truth, preds)
        mae, rmse, r2, pcc = _oracle_metrics(truth.tolist(), preds.tolist())
        worst = max(worst, abs(r.mae - mae), abs(r.rmse - rmse))
        assert abs(r.mae - mae) <= 1e-12
        assert abs(r.rmse - rmse) <= 1e-12
        if r2 is None:
            assert r.r_squared is None
        else:
            assert abs(r.r_squared - r2) <= 1e-12
        if pcc is None:
            assert r.pcc is None
        else:
            assert abs(r.pcc - pcc) <= 1e-12

    # worked examples hold exactly
    perfect = evaluate([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert (perfect.mae, perfect.rmse, perfect.r_squared, perfect.pcc) == (0.0, 0.0, 1.0, 1.0)
    offset = evaluate([0.0, 1.0, 2.0], [1.0, 2.0, 3.0])
    assert (offset.mae, offset.rmse) == (1.0, 1.0) and offset.r_squared == -0.5
    flipped = evaluate([1.0, 2.0], [2.0, 1.0])
    assert flipped.r_squared == -3.0 and flipped.pcc == -1.0

    elapsed = time.monotonic() - started
    assert elapsed < 5.0
    print(f"\n[criterion 1] 1000 vector pairs, max |error| {worst:.2e} <= 1e-12, {elapsed:.1f}s < 5s")


# ---------------------------------------------------------------------------
# criterion 2: neighbour search against an exhaustive-sort oracle
# ---------------------------------------------------------------------------


def _slow_rank(rows, query, ranges, p, k):
    scored = []
    for idx, (numeric, nominal) in enumerate(rows):
        acc = 0.0
        for v, q, (lo, hi) in zip(numeric, query[0], ranges):
            if hi <= lo:
                continue
            nv = min(1.0, max(0.0, (v - lo) / (hi - lo)))
            nq = min(1.0, max(0.0, (q - lo) / (hi - lo)))
            acc += abs(nv - nq) ** p
        for t, tq in zip(nominal, query[1]):
            if t != tq:
                acc += 1.0
        scored.append((acc ** (1.0 / p), idx))
    scored.sort(key=lambda t: (t[0], t[1]))
    return [(idx, d) for d, idx in scored[:k]]


def test_criterion_02_knn_oracle_equivalence():
    started = time.monotonic()
    rng = np.random.default_rng(7)
    n = 500
    numeric = rng.random((n, 2)) * 6 - 3
    nominal = np.array([f"t{v}" for v in rng.integers(4, size=n)], dtype=object)
    d = build_dataset(numeric, nominal, rng.random(n), schema=build_schema(2, 1))
    rows = [(tuple(numeric[i]), (nominal[i],)) for i in range(n)]

    for p in (2.0, 3.0):
        model = KnnModel(d, k=5, order=p)
        for _ in range(100):
            qn = tuple(rng.random(2) * 7 - 3.5)
            qc = (f"t{rng.integers(5)}",)
            got = knn_query(model, Instance(qn, qc, None))
            want = _slow_rank(rows, (qn, qc), model.cfg.numeric_ranges, p, 5)
            assert [i for i, _ in got] == [i for i, _ in want]
            # rankings are identical; the distance values themselves can differ
            # from the scalar-loop oracle by one ulp (vectorized vs libm pow)
            for (_, dg), (_, dw) in zip(got, want):
                assert abs(dg - dw) <= 1e-12

    elapsed = time.monotonic() - started
    assert elapsed < 10.0
    print(
        f"\n[criterion 2] 200 queries x 500 rows, p in (2, 3): "
        f"indices exact, distances within 1e-12, {elapsed:.1f}s < 10s"
    )


# ---------------------------------------------------------------------------
# criterion 3: relevance function properties
# ---------------------------------------------------------------------------


def test_criterion_03_relevance_properties():
    rng = np.random.default_rng(13)

    # bounded on 1e5 random evaluations across several fitted curves
    total_evals = 0
    for seed in range(5):
        y = np.random.default_rng(seed).normal(3.0, 2.0, 400)
        fn = RelevanceFn.from_targets(y)
        grid = rng.uniform(y.min() - 2, y.max() + 2, 20_000)
        vals = fn(grid)
        assert np.all(vals >= 0.0) and np.all(vals <= 1.0)
        total_evals += grid.size

        # the centre control point is the median and maps to zero
        pts = auto_control_points(y)
        centre = pts[1][0] if len(pts) == 3 else pts[0][0]
        assert centre == float(np.quantile(y, 0.5))
        assert fn(centre) == 0.0

        # monotone on each side of the median (dense scan)
        lo_y = fn.control_points[0][0]
        hi_y = fn.control_points[-1][0]
        left = fn(np.linspace(lo_y, centre, 20_001))
        right = fn(np.linspace(centre, hi_y, 20_001))
        assert np.all(np.diff(left) <= 1e-12)
        assert np.all(np.diff(right) >= -1e-12)
    assert total_evals == 100_000

    # rare set shrinks as the threshold rises
    data = build_dataset(np.zeros((500, 1)), y=np.random.default_rng(2).normal(size=500))
    fn = RelevanceFn.from_targets(data.y)
    sizes = [len(partition_bins(data, fn, t).rare_indices) for t in (0.1, 0.25, 0.5, 0.8)]
    assert sizes == sorted(sizes, reverse=True) and sizes[0] > sizes[-1]
    print(f"\n[criterion 3] 1e5 evals in [0, 1]; phi(median)=0; monotone; rare sizes {sizes}")


# ---------------------------------------------------------------------------
# criterion 4: synthesis geometry and benchmark rebalancing
# ---------------------------------------------------------------------------


def test_criterion_04_synthesis_geometry_and_balance():
    rng = np.random.default_rng(5)
    cfg = DistanceConfig(order=2.0, numeric_ranges=((0.0, 1.0), (0.0, 1.0), (0.0, 1.0)))

    violations = 0
    for _ in range(10_000):
        a = Instance(tuple(rng.random(3)), (), float(rng.random()))
        b = Instance(tuple(rng.random(3)), (), float(rng.random()))
        out = smoter_interpolate(a, b, cfg, rng)
        for v, va, vb in zip(out.numeric, a.numeric, b.numeric):
            if not (min(va, vb) - 1e-15 <= v <= max(va, vb) + 1e-15):
                violations += 1
        lo, hi = sorted((a.target, b.target))
        if not (lo - 1e-12 <= out.target <= hi + 1e-12):
            violations += 1
    assert violations == 0

    seed_inst = Instance((0.5,), (), 0.5)
    draws = np.array(
        [
            gaussian_perturb(seed_inst, np.array([3.0]), 1.0, [], 0.05, rng).numeric[0]
            for _ in range(10_000)
        ]
    )
    sd = float(np.std(draws))
    expect = 0.05 * 3.0
    assert abs(sd - expect) / expect <= 0.10

    d = skewed_benchmark(0)
    params = SmognParams(mode="balance", control_points=benchmark_phi_points(), seed=0)
    out, _ = smogn(d, params)
    fn = RelevanceFn(benchmark_phi_points())
    share = float(np.mean(fn(out.y) >= params.threshold))
    assert 0.4 <= share <= 0.6
    print(
        f"\n[criterion 4] containment 10^4 draws, 0 violations; "
        f"perturb sd {sd:.4f} vs {expect:.4f}; balance rare share {share:.3f} in [0.4, 0.6]"
    )


# ---------------------------------------------------------------------------
# criterion 5: improvement score against a full-rebuild oracle
# ---------------------------------------------------------------------------


def _rebuild_oracle(labeled, k, p, candidate, y_hat):
    cfg = DistanceConfig.from_dataset(labeled, order=p)
    base = KnnModel(labeled, k=k, cfg=cfg)
    probe = Instance(candidate.numeric, candidate.nominal, None, uid=None)
    omega = [i for i, _ in knn_query(base, probe, k=k)]
    extra = Dataset(
        labeled.schema,
        np.asarray([candidate.numeric], dtype=float),
        np.asarray([list(candidate.nominal)], dtype=object).reshape(1, -1),
        np.array([y_hat]),
        ids=np.array([10_000_000]),
    )
    grown = KnnModel(labeled.concat(extra), k=k, cfg=cfg)
    total = 0.0
    for i in omega:
        member = labeled.instance(i)
        h = knn_predict(base, member)
        h_prime = knn_predict(grown, member)
        total += (member.target - h) ** 2 - (member.target - h_prime) ** 2
    return total


def test_criterion_05_improvement_score_oracle():
    rng = np.random.default_rng(31)
    worst = 0.0
    for trial in range(100):
        n = int(rng.integers(3, 51))
        k = int(rng.integers(1, min(n, 5)))
        p = float(rng.choice([2.0, 3.0]))
        numeric = rng.random((n, 2))
        nominal = np.array([f"t{v}" for v in rng.integers(3, size=n)], dtype=object)
        labeled = build_dataset(numeric, nominal, rng.random(n), schema=build_schema(2, 1))
        model = KnnModel(labeled, k=k, cfg=DistanceConfig.from_dataset(labeled, order=p))
        cand = Instance(tuple(rng.random(2) * 1.3), (f"t{rng.integers(4)}",), None)
        y_hat = float(rng.random())
        diff = abs(delta_mse(model, cand, y_hat) - _rebuild_oracle(labeled, k, p, cand, y_hat))
        worst = max(worst, diff)
        assert diff <= 1e-10, f"trial {trial}: |diff| = {diff:.2e}"
    print(f"\n[criterion 5] 100 rebuild-oracle configs, max |diff| {worst:.2e} <= 1e-10")


# ---------------------------------------------------------------------------
# criterion 6: co-training loop contracts
# ---------------------------------------------------------------------------


def test_criterion_06_cotraining_contracts():
    defaults = CoregParams()
    assert defaults.max_iterations == 500
    assert defaults.pool_size == 100

    rng = np.random.default_rng(0)
    schema = build_schema(1)
    labeled = Dataset(
        schema, rng.random((25, 1)), np.empty((25, 0), dtype=object), rng.random(25)
    )
    empty = labeled.take(np.array([], dtype=np.int64))
    supervised = coreg_train(labeled, empty)
    assert supervised.iterations_run == 0 and supervised.history == ()
    b1 = KnnModel(labeled, k=3, order=2.0)
    b2 = KnnModel(labeled, k=3, order=3.0)
    for x in np.linspace(0, 1, 20):
        q = Instance((float(x),), (), None)
        assert coreg_predict(supervised, q) == (knn_predict(b1, q) + knn_predict(b2, q)) / 2.0

    d = skewed_benchmark(1, n=150)
    grown_l = d.take(np.arange(30))
    grown_u = d.take(np.arange(30, 130)).relabeled(np.full(100, np.nan))
    model = coreg_train(grown_l, grown_u, CoregParams(seed=0))
    assert model.history, "co-training adopted nothing on benchmark data"
    assert all(h.delta > 0.0 for h in model.history)
    slots = [(h.iteration, h.learner) for h in model.history]
    assert len(set(slots)) == len(slots)
    assert model.iterations_run <= defaults.max_iterations
    print(
        f"\n[criterion 6] supervised fallback exact; {len(model.history)} adoptions, "
        f"all deltas > 0, <= 1 per learner per iteration"
    )


# ---------------------------------------------------------------------------
# criterion 7: resampling + co-training beats its ablations on skewed data
# ---------------------------------------------------------------------------


def test_criterion_07_benchmark_improvement():
    started = time.monotonic()
    beats_coreg = 0
    beats_supervised = 0
    for seed in range(10):
        report = run_experiment(bench_config(seed), dataset=skewed_benchmark(seed), write=False)
        ALL_REPORTS.append(report)
        mean_rmse = {m: report.summary[m]["rmse"]["mean"] for m in BENCH_MODELS}
        beats_coreg += mean_rmse["smogn-coreg"] <= mean_rmse["coreg"]
        beats_supervised += mean_rmse["smogn-coreg"] <= min(
            mean_rmse["knn4"], mean_rmse["knn7"], mean_rmse["knn9"]
        )
    elapsed = time.monotonic() - started
    print(
        f"\n[criterion 7] smogn-coreg <= coreg on {beats_coreg}/10 seeds; "
        f"<= best supervised k-NN on {beats_supervised}/10 seeds; {elapsed:.0f}s < 300s"
    )
    assert beats_coreg >= 7
    assert beats_supervised >= 7
    assert elapsed < 300.0


# ---------------------------------------------------------------------------
# criterion 8: more unlabeled data helps at a fixed labeled budget
# ---------------------------------------------------------------------------


def test_criterion_08_unlabeled_ratio_sweep_direction():
    started = time.monotonic()
    wins = 0
    for seed in range(10):
        cfg = bench_config(seed, models=("smogn-coreg",), output_dir="unused")
        reports = sweep_ur(cfg, [0.5, 0.8, 0.99], dataset=skewed_benchmark(seed), write=False)
        ALL_REPORTS.extend(reports.values())
        r2_low = reports[0.5].summary["smogn-coreg"]["r2"]["mean"]
        r2_high = reports[0.99].summary["smogn-coreg"]["r2"]["mean"]
        wins += r2_high >= r2_low
    elapsed = time.monotonic() - started
    print(f"\n[criterion 8] R^2(0.99) >= R^2(0.5) on {wins}/10 seeds (need > 5); {elapsed:.0f}s")
    assert wins >= 6


# ---------------------------------------------------------------------------
# criterion 9: end-to-end determinism
# ---------------------------------------------------------------------------


def test_criterion_09_byte_identical_reports(tmp_path):
    d = skewed_benchmark(4, n=200)
    cfg = bench_config(
        4, models=("knn4", "coreg"), folds=5, output_dir=str(tmp_path / "run")
    )
    first = run_experiment(cfg, dataset=d, write=True)
    blob1 = (tmp_path / "run" / "report.json").read_bytes()
    second = run_experiment(cfg, dataset=d, write=True)
    blob2 = (tmp_path / "run" / "report.json").read_bytes()
    ALL_REPORTS.extend([first, second])
    assert blob1 == blob2
    json.loads(blob1)  # the artifact is valid JSON
    print(f"\n[criterion 9] identical config+seed: report.json byte-identical ({len(blob1)} bytes)")


# ---------------------------------------------------------------------------
# criterion 10: no train/test identity leakage anywhere in the suite
# ---------------------------------------------------------------------------


def test_criterion_10_leakage_audit():
    assert len(ALL_REPORTS) >= 40, "earlier criteria must contribute their reports"
    folds_checked = 0
    for report in ALL_REPORTS:
        assert report.leakage_free
        for audit in report.audits:
            assert not (audit.test_ids & audit.train_input_ids)
            folds_checked += 1
    print(
        f"\n[criterion 10] {folds_checked} folds across {len(ALL_REPORTS)} reports: "
        f"all test/train-input intersections empty"
    )
