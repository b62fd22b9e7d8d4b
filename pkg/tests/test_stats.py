import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speclab.errors import InsufficientData
from speclab.models import EnsembleSpec
from speclab.stats import (
    RunRecord,
    ShapeWarning,
    build_report,
    covariance_spectrum,
    exclusion_counts,
    half_list_median,
    leading_vector_shape,
    percentile,
    pooled_median,
    relative_difference,
    run_ensemble,
    spectral_ratio,
    two_run_percentiles,
)


def _records(rows):
    return [RunRecord(i, math.nan, math.nan, np.asarray(r, dtype=float)) for i, r in enumerate(rows)]


def test_percentile_rule():
    v = list(range(1, 11))
    assert percentile(v, 50) == 5
    assert percentile(v, 95) == 10
    assert percentile(v, 51) == 6
    assert percentile(v, 0) == 1
    assert percentile([7.0], 99) == 7.0
    assert percentile([3, 1, 2], 50) == 2
    with pytest.raises(InsufficientData):
        percentile([], 50)
    with pytest.raises(ValueError):
        percentile(v, 101)


def test_relative_difference():
    assert relative_difference(3.0, 3.0) == 0
    assert relative_difference(1.0, 3.0) == pytest.approx(1.0)
    assert relative_difference(1.0, 3.0) == relative_difference(3.0, 1.0)


def test_covariance_examples():
    lam, v = covariance_spectrum(_records([(0, 1), (0, 1)]))
    np.testing.assert_allclose(lam, [0, 1], atol=1e-15)
    assert spectral_ratio(lam) == 0
    np.testing.assert_allclose(v, [0, 1], atol=1e-15)

    lam, v = covariance_spectrum(_records([(1, 2), (2, 4)]))
    np.testing.assert_allclose(lam, [0, 12.5], atol=1e-12)
    np.testing.assert_allclose(v, np.array([1, 2]) / math.sqrt(5))

    lam, _ = covariance_spectrum(_records([(1, 2), (2, 4)]), centered=True)
    np.testing.assert_allclose(lam, [0, 1.25], atol=1e-12)


def test_covariance_needs_enough_samples():
    with pytest.raises(InsufficientData):
        covariance_spectrum(_records([(1, 2, 3), (2, 3, 4)]))


def test_leading_vector_shape():
    assert leading_vector_shape([1, 2, 3]) == pytest.approx(1)
    assert leading_vector_shape([3, 2, 1]) == pytest.approx(-1)
    with pytest.raises(ValueError):
        leading_vector_shape([0, 0, 0])
    with pytest.warns(ShapeWarning):
        assert leading_vector_shape([0.5, 0.5]) == 0


def test_pooled_and_half_list_median():
    recs = _records([np.log([1, 2, 3])])
    assert pooled_median(recs) == pytest.approx(2)
    recs = [RunRecord(i, 1.0, h, np.zeros(2)) for i, h in enumerate([4.0, 1.0, 9.0])]
    assert half_list_median(recs) == 4.0


def test_exclusions_are_counted_and_skipped():
    recs = _records([(0, 1), (1, 1)]) + [RunRecord(2, math.nan, math.nan, np.empty(0), "degenerate")]
    assert exclusion_counts(recs) == {"degenerate": 1}
    lam, _ = covariance_spectrum(recs)
    assert len(lam) == 2


def test_run_ensemble_deterministic_and_thread_independent():
    spec = EnsembleSpec(6, 200, 77)
    a = run_ensemble(spec, threads=1)
    b = run_ensemble(spec, threads=4)
    assert [r.instability_index for r in a] == [r.instability_index for r in b]
    assert all(np.array_equal(x.sorted_log_norms, y.sorted_log_norms) for x, y in zip(a, b))


def test_records_are_consistent():
    for r in run_ensemble(EnsembleSpec(7, 50, 5)):
        assert r.ok
        assert np.all(np.diff(r.sorted_log_norms) >= 0)
        assert r.sorted_log_norms[0] >= -1e-9  # every projection norm is >= 1
        assert r.instability_index == pytest.approx(math.exp(r.sorted_log_norms[-1]))
        assert r.half_list_index == pytest.approx(math.exp(r.sorted_log_norms[3]))


def test_two_run_reuses_records():
    spec = EnsembleSpec(5, 300, 4)
    rec = run_ensemble(spec)
    P, D, (r1, r2) = two_run_percentiles(spec, [50], records=rec)
    assert r1 is rec
    p1 = percentile([r.instability_index for r in r1], 50)
    p2 = percentile([r.instability_index for r in r2], 50)
    assert P[50] == pytest.approx((p1 + p2) / 2)
    assert D[50] == pytest.approx(relative_difference(p1, p2))


def test_build_report_fields():
    report, _ = build_report(EnsembleSpec(5, 400, 8), percentiles=(50, 95))
    d = report.to_dict()
    assert "wall_time" not in d
    assert set(d["percentiles"]) == {"50", "95"}
    assert 0 <= d["covariance"]["mu"] <= 1
    assert d["usable_samples"] + sum(d["excluded"].values()) == 800
    assert d["percentiles"]["50"] <= d["percentiles"]["95"]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=40), st.floats(0, 100))
def test_percentile_is_a_member_and_monotone(values, r):
    p = percentile(values, r)
    assert p in values
    assert percentile(values, min(r + 10, 100)) >= p


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32))
def test_mu_in_unit_interval(N, seed):
    rng = np.random.default_rng(seed)
    recs = _records(rng.normal(size=(3 * N, N)))
    lam, v = covariance_spectrum(recs)
    assert 0 <= spectral_ratio(lam) <= 1
    assert v.sum() >= 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ShapeWarning)
        assert -1 - 1e-12 <= leading_vector_shape(v) <= 1 + 1e-12


def test_two_run_medians_average():
    from speclab.stats import two_run_medians

    a = [RunRecord(0, 1.0, 4.0, np.log([1.0, 2.0, 3.0]))]
    b = [RunRecord(0, 1.0, 6.0, np.log([3.0, 4.0, 5.0]))]
    assert two_run_medians(a, b) == (pytest.approx(5.0), pytest.approx(3.0))
