import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taupath.stats import (CSV_COLUMNS, Moments, SensitivityEstimate, aggregate, compute_metrics,
                           finish_estimate, merge_all, relative_error, to_csv, to_json)


def test_three_samples():
    est = aggregate([1.0, 2.0, 3.0])
    assert est.mean == 2.0
    assert est.stddev_of_estimator == pytest.approx(math.sqrt(2 / 6))
    assert est.stddev_of_estimator == pytest.approx(0.5774, abs=1e-4)


def test_constant_samples():
    est = aggregate([4.25] * 10)
    assert est.mean == 4.25 and est.stddev_of_estimator == 0.0


def test_too_few_samples():
    with pytest.raises(ValueError):
        aggregate([1.0])
    with pytest.raises(ValueError):
        aggregate(Moments())


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        aggregate([1.0, math.nan])


def test_merge_halves():
    rng = np.random.default_rng(0)
    x = rng.normal(-90, 30, 10_001)
    whole = aggregate(x)
    merged = aggregate(Moments.of(x[:4000]) + Moments.of(x[4000:]))
    assert merged.mean == pytest.approx(whole.mean, rel=1e-10)
    assert merged.stddev_of_estimator == pytest.approx(whole.stddev_of_estimator, rel=1e-10)


def test_merge_with_empty():
    m = Moments.of([1.0, 2.0])
    assert m + Moments() == m and Moments() + m == m
    assert merge_all([]) == Moments()


def test_aggregate_accepts_list_of_moments():
    x = np.arange(100, dtype=float)
    parts = [Moments.of(x[i:i + 7]) for i in range(0, 100, 7)]
    assert aggregate(parts).mean == pytest.approx(49.5, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), cuts=st.lists(st.integers(1, 999), max_size=8))
def test_partition_and_permutation_invariance(seed, cuts):
    rng = np.random.default_rng(seed)
    x = rng.normal(rng.uniform(-1e3, 1e3), rng.uniform(0.1, 100), 1000)
    whole = aggregate(x)
    bounds = [0, *sorted(set(cuts)), 1000]
    parts = [Moments.of(x[a:b]) for a, b in zip(bounds, bounds[1:])]
    merged = aggregate(parts)
    shuffled = aggregate(rng.permutation(x))
    for other in (merged, shuffled):
        assert other.mean == pytest.approx(whole.mean, rel=1e-10, abs=1e-12)
        assert other.stddev_of_estimator == pytest.approx(whole.stddev_of_estimator, rel=1e-10)


def test_normal_calibration():
    x = np.random.default_rng(1).standard_normal(10_000)
    assert aggregate(x).stddev_of_estimator == pytest.approx(1 / math.sqrt(10_000), rel=0.1)


def test_relative_error_example():
    assert relative_error(-90.938, -90.204) == pytest.approx(0.8137, abs=1e-3)
    assert relative_error(5.0, 5.0) == 0.0
    with pytest.raises(ValueError):
        relative_error(1.0, 0.0)


def test_metrics_example():
    est = SensitivityEstimate(mean=-90.079, stddev_of_estimator=0.093, N=100_000)
    out = compute_metrics(est, reference=-90.204, cost_per_sample=3.56e-5)
    assert out.rsd == pytest.approx(0.3265, abs=1e-4)
    assert out.rsdcc_seconds == pytest.approx(0.379e-5, rel=5e-3)
    assert out.re_percent == pytest.approx(0.1386, abs=1e-3)


def test_metrics_zero_mean():
    est = SensitivityEstimate(mean=0.0, stddev_of_estimator=0.0, N=10)
    with pytest.raises(ValueError):
        compute_metrics(est, cost_per_sample=1.0)
    out = finish_estimate(est, None, 1.0)
    assert out.rsd is None and out.cost_per_sample_seconds == 1.0


def test_rsdcc_linear_in_cost_and_order_free():
    x = np.random.default_rng(2).normal(3, 1, 500)
    a = compute_metrics(aggregate(x), cost_per_sample=1e-4)
    b = compute_metrics(aggregate(x[::-1]), cost_per_sample=2e-4)
    assert b.rsdcc_seconds == pytest.approx(2 * a.rsdcc_seconds, rel=1e-10)


def test_csv_and_json_columns():
    est = compute_metrics(aggregate([1.0, 2.0, 4.0]), reference=2.0, cost_per_sample=0.5)
    est = est.with_fields(method="eipa", param="theta2", T=5.0, seed=3, m0=10)
    rows = list(csv.DictReader(io.StringIO(to_csv([est, est]))))
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 2
    assert float(rows[0]["mean"]) == est.mean and rows[0]["tau_max"] == ""
    data = json.loads(to_json([est]))
    assert tuple(data) == CSV_COLUMNS and data["tau_max"] is None
    assert len(json.loads(to_json([est, est]))) == 2


def test_ci99():
    assert SensitivityEstimate(0.0, 1.0, 10).ci99() == pytest.approx(2.5758, abs=1e-4)
