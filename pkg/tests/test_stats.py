import statistics

import numpy as np
import pytest

from fairscope.errors import IncompleteTableError
from fairscope.metrics import ClassMetrics, EvalSet, MetricTable
from fairscope.records import FUSED_ORDER, Regime
from fairscope.stats import accuracy_values, aggregate_stats, summarize


def test_regular_means(fixture_table):
    f = aggregate_stats(fixture_table, "regular", "female")
    m = aggregate_stats(fixture_table, "regular", "male")
    assert f.n == m.n == 24
    assert f.mean == pytest.approx(0.858333333333, abs=1e-9)
    assert m.mean == pytest.approx(0.816666666667, abs=1e-9)
    assert f.mean > m.mean


def test_male_trained_means(fixture_table):
    m = aggregate_stats(fixture_table, "male", "male")
    f = aggregate_stats(fixture_table, "male", "female")
    assert m.mean == pytest.approx(0.802083333333, abs=1e-9)
    assert f.mean == pytest.approx(0.785416666667, abs=1e-9)


def test_means_match_plain_arithmetic(fixture_table):
    for regime in Regime:
        for group in EvalSet:
            vals = accuracy_values(fixture_table, regime, group)
            assert aggregate_stats(fixture_table, regime, group).mean == pytest.approx(sum(vals) / len(vals), abs=1e-12)


def test_constant_table():
    cells = {("m", Regime.REGULAR, g, c): ClassMetrics(0.8, 0.5, 0.5) for g in EvalSet for c in FUSED_ORDER}
    st = aggregate_stats(MetricTable(cells), "regular", "test")
    assert st.min == st.max == st.median == pytest.approx(0.8)
    assert st.mean == pytest.approx(0.8) and st.variance == pytest.approx(0.0, abs=1e-18)


def test_quartiles_against_statistics_module():
    rng = np.random.default_rng(11)
    for _ in range(50):
        v = rng.random(int(rng.integers(2, 40)))
        st = summarize(v)
        q1, med, q3 = statistics.quantiles(v, n=4, method="inclusive")
        assert (st.q1, st.median, st.q3) == pytest.approx((q1, med, q3), abs=1e-12)
        assert st.variance == pytest.approx(statistics.pvariance(v), abs=1e-12)


def test_missing_regime_is_incomplete(fixture_table):
    cells = {k: v for k, v in fixture_table.items() if k[1] is Regime.REGULAR}
    with pytest.raises(IncompleteTableError):
        aggregate_stats(MetricTable(cells), "male", "test")
