
import pytest
from scipy import stats

from sixpp.metrics import (MetricsRecord, aggregate, latency_stats, percentile,
                           spearman_rho)


def record(latencies, lost=0):
    rec = MetricsRecord()
    for i, lat in enumerate(latencies):
        rec.expect(i, 1)
        rec.deliver(i, 1, lat)
    for j in range(lost):
        rec.expect(1000 + j, 1)
    return rec


def test_all_delivered_constant():
    s = aggregate([record([100_000] * 10)])
    assert s.mean == s.median == 100_000 and s.reliability == 1.0


def test_reliability_arithmetic():
    s = aggregate([record([5] * 199, lost=1)])
    assert s.reliability == pytest.approx(0.995)


def test_skewed_mean_median():
    _, mean, median, _ = latency_stats([1, 2, 3, 4, 100])
    assert median == 3 and mean == 22 and mean >= median


def test_empty_marker():
    s = aggregate([])
    assert s.empty and s.mean is None and s.reliability is None
    lost_only = aggregate([record([], lost=3)])
    assert lost_only.empty and lost_only.reliability == 0.0


def test_association_once():
    rec = MetricsRecord()
    assert rec.record_association(3, 10)
    assert not rec.record_association(3, 20)
    assert rec.association_latency[3] == 10


def test_deliver_once():
    rec = MetricsRecord()
    rec.expect(1, 2)
    assert rec.deliver(1, 2, 50)
    assert not rec.deliver(1, 2, 70)
    assert rec.delivery_latencies() == [50]


def test_percentile_matches_numpy():
    import numpy as np
    values = [3, 1, 4, 1, 5, 9, 2, 6]
    for q in (0, 25, 50, 95, 100):
        assert percentile(values, q) == pytest.approx(np.percentile(values, q))


def test_spearman_matches_scipy():
    xs = [1, 2, 2, 3, 4, 5, 5, 6]
    ys = [10, 8, 9, 7, 7, 3, 4, 1]
    assert spearman_rho(xs, ys) == pytest.approx(stats.spearmanr(xs, ys).statistic)


def test_spearman_constant_and_errors():
    assert spearman_rho([1, 1, 1], [1, 2, 3]) == 0.0
    with pytest.raises(ValueError):
        spearman_rho([1], [1])


def test_control_totals_pooled():
    a, b = MetricsRecord(), MetricsRecord()
    a.control_frames["EB"] += 2
    b.control_frames["EB"] += 1
    b.control_frames["KA"] += 4
    assert aggregate([a, b]).control_frames == {"EB": 3, "KA": 4}
