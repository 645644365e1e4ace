import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from acsseg import metrics
from acsseg.core import Segmentation
from conftest import annotation


def test_boundary_example():
    rep = metrics.boundary_metrics([1.0, 5.0], [1.1, 4.8])
    assert rep.mean_error_s == pytest.approx(0.15)
    assert rep.barrier_acc[0.2] == 1.0


def test_error_equal_to_threshold_is_hit():
    assert metrics.barrier_accuracy([0.2], (0.2,)) == {0.2: 1.0}
    assert metrics.barrier_accuracy([0.2 + 1e-6], (0.2,)) == {0.2: 0.0}


def test_identity():
    rep = metrics.boundary_metrics([1.0, 2.5, 9.0], [1.0, 2.5, 9.0])
    assert rep.mean_error_s == 0.0
    assert all(v == 1.0 for v in rep.barrier_acc.values())


def test_accepts_segmentation_and_annotation():
    seg = Segmentation((0, 1), (3.1,), (1.0, 5.0))
    truth = annotation(("A", 0, 3), ("B", 3, 7))
    rep = metrics.boundary_metrics(seg, truth)
    assert rep.per_boundary_errors_s == [pytest.approx(0.1)]


def test_boundary_count_mismatch():
    with pytest.raises(metrics.MetricsError):
        metrics.boundary_metrics([1.0], [1.0, 2.0])


def confusion_oracle(pred, true, n):
    # hand-rolled per-class counts
    f1s = []
    for k in range(n):
        tp = sum(1 for p, t in zip(pred, true) if p == k and t == k)
        fp = sum(1 for p, t in zip(pred, true) if p == k and t != k)
        fn = sum(1 for p, t in zip(pred, true) if p != k and t == k)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    return sum(p == t for p, t in zip(pred, true)) / len(pred), sum(f1s) / n


def test_chunk_metrics_example():
    acc, f1 = metrics.chunk_metrics([0, 0, 1, 1], [0, 1, 1, 1], 2)
    assert acc == 0.75
    assert f1 == pytest.approx(11 / 15)
    assert (acc, f1) == pytest.approx(confusion_oracle([0, 0, 1, 1], [0, 1, 1, 1], 2))


def test_chunk_metrics_identity_and_flip():
    assert metrics.chunk_metrics([0, 1, 2], [0, 1, 2], 3) == (1.0, 1.0)
    assert metrics.chunk_metrics([1, 1, 0], [0, 0, 1], 2) == (0.0, 0.0)


def test_chunk_metrics_errors():
    with pytest.raises(metrics.MetricsError):
        metrics.chunk_metrics([0, 1], [0], 2)


@settings(max_examples=100)
@given(st.integers(1, 5), st.integers(1, 40), st.integers(0, 10**6))
def test_chunk_metrics_match_oracle_and_permutation(n, m, seed):
    r = np.random.default_rng(seed)
    pred, true = r.integers(0, n, m), r.integers(0, n, m)
    acc, f1 = metrics.chunk_metrics(pred, true, n)
    assert (acc, f1) == pytest.approx(confusion_oracle(list(pred), list(true), n))
    perm = r.permutation(n)
    assert metrics.chunk_metrics(perm[pred], perm[true], n) == pytest.approx((acc, f1))


@settings(max_examples=100)
@given(st.lists(st.floats(0, 5), min_size=1, max_size=30))
def test_barrier_accuracy_monotone(errors):
    acc = metrics.barrier_accuracy(errors)
    assert 0 <= acc[0.2] <= acc[0.5] <= acc[1.0] <= 1
    rep = metrics.report_from_errors(errors)
    assert rep.mean_error_s == pytest.approx(np.mean(errors))


def test_pooled_mean_is_per_boundary():
    pairs = [([1.0], [1.5]), ([1.0, 2.0, 3.0], [1.0, 2.0, 3.1])]
    rep = metrics.pooled_boundary_metrics(pairs)
    assert rep.mean_error_s == pytest.approx((0.5 + 0 + 0 + 0.1) / 4)
    assert len(rep.per_boundary_errors_s) == 4


def test_report_json_keys():
    rep = metrics.boundary_metrics([1.0], [1.0])
    d = json.loads(rep.to_json())
    assert list(d) == ["mean_error_s", "barrier_acc_0p2", "barrier_acc_0p5", "barrier_acc_1p0",
                       "chunk_accuracy", "chunk_f1_macro"]
    assert d["chunk_accuracy"] is None


def test_evaluate_with_chunks():
    seg = Segmentation((0, 0, 1, 1), (0.15,), (0.0, 0.1, 0.2, 0.3))
    rep = metrics.evaluate(seg, annotation(("A", 0, 0.05), ("B", 0.05, 0.4)), [0, 1, 1, 1], 2)
    assert rep.per_boundary_errors_s == [pytest.approx(0.1)]
    assert rep.chunk_accuracy == 0.75
