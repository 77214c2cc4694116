import numpy as np
import pytest

from pap.errors import DimensionMismatch, EmptyEvaluation
from pap.metrics import SampleScore, aggregate, iou, mask_overlap


def brute_force_report(samples):
    """Independent loop-based reimplementation used as the oracle."""
    n = len(samples)
    ious = []
    inter_sum = 0
    union_sum = 0
    for inter, union, v in samples:
        ious.append(v)
        inter_sum += inter
        union_sum += union
    giou = 0.0
    for v in ious:
        giou += v
    giou /= n
    ciou = 1.0 if union_sum == 0 else inter_sum / union_sum
    precisions = []
    for k in range(10):
        t = (50 + 5 * k) / 100
        hits = 0
        for v in ious:
            if v > t:
                hits += 1
        precisions.append(hits / n)
    p50_95 = 0.0
    for p in precisions:
        p50_95 += p
    p50_95 /= 10
    return giou, ciou, precisions[0], p50_95


class TestIoU:
    def test_identical(self):
        m = np.zeros((10, 10), bool)
        m[2:5, 3:8] = True
        assert iou(m, m) == 1.0

    def test_disjoint(self):
        a = np.zeros((10, 10), bool)
        b = np.zeros((10, 10), bool)
        a[0:2, 0:2] = True
        b[5:7, 5:7] = True
        assert iou(a, b) == 0.0

    def test_partial_overlap_hand_counted(self):
        # two 2x4 rectangles overlapping in a 2x2 block: inter 4, union 12
        a = np.zeros((8, 8), bool)
        b = np.zeros((8, 8), bool)
        a[0:2, 0:4] = True
        b[0:2, 2:6] = True
        s = mask_overlap(a, b)
        assert (s.intersection, s.union) == (4, 12)
        assert s.iou == pytest.approx(1 / 3)

    def test_both_empty_is_one(self):
        assert iou(np.zeros((4, 4), bool), np.zeros((4, 4), bool)) == 1.0

    def test_one_empty_is_zero(self):
        a = np.zeros((4, 4), bool)
        b = a.copy()
        b[0, 0] = True
        assert iou(a, b) == 0.0

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            iou(np.zeros((4, 4), bool), np.zeros((4, 5), bool))


class TestAggregate:
    def test_single_sample_07(self):
        # strict '>' convention: 0.7 passes thresholds .50/.55/.60/.65 only
        r = aggregate([SampleScore(7, 10, 0.7)])
        assert r.giou == pytest.approx(0.7)
        assert r.ciou == pytest.approx(0.7)
        assert r.p50 == 1.0
        assert r.p50_95 == pytest.approx(0.4)

    def test_two_samples(self):
        r = aggregate([SampleScore(1, 2, 0.5), SampleScore(3, 3, 1.0)])
        assert r.giou == pytest.approx(0.75)
        assert r.ciou == pytest.approx(4 / 5)

    def test_all_perfect(self):
        r = aggregate([SampleScore(5, 5, 1.0)] * 3)
        assert (r.giou, r.ciou, r.p50, r.p50_95) == (1.0, 1.0, 1.0, 1.0)

    def test_empty_raises(self):
        with pytest.raises(EmptyEvaluation):
            aggregate([])

    def test_order_invariance(self):
        rng = np.random.default_rng(5)
        samples = []
        for _ in range(50):
            union = int(rng.integers(1, 1000))
            inter = int(rng.integers(0, union + 1))
            samples.append(SampleScore(inter, union, inter / union))
        a = aggregate(samples)
        b = aggregate(list(reversed(samples)))
        assert (a.giou, a.ciou, a.p50, a.p50_95) == (b.giou, b.ciou, b.p50, b.p50_95)

    def test_ciou_between_min_and_max_iou(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            samples = []
            for _ in range(int(rng.integers(2, 30))):
                union = int(rng.integers(1, 500))
                inter = int(rng.integers(0, union + 1))
                samples.append(SampleScore(inter, union, inter / union))
            r = aggregate(samples)
            ious = [s.iou for s in samples]
            assert min(ious) - 1e-12 <= r.ciou <= max(ious) + 1e-12

    def test_precision_curve_monotone(self):
        rng = np.random.default_rng(2)
        samples = []
        for _ in range(200):
            union = int(rng.integers(1, 100))
            inter = int(rng.integers(0, union + 1))
            samples.append(SampleScore(inter, union, inter / union))
        r = aggregate(samples)
        n = len(samples)
        precisions = [sum(1 for s in samples if s.iou > t) / n
                      for t in [(50 + 5 * k) / 100 for k in range(10)]]
        assert all(a >= b for a, b in zip(precisions, precisions[1:]))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(123)
        samples = []
        for _ in range(1000):
            union = int(rng.integers(0, 10000))
            inter = int(rng.integers(0, union + 1))
            v = 1.0 if union == 0 else inter / union
            samples.append((inter, union, v))
        r = aggregate([SampleScore(*s) for s in samples])
        giou, ciou, p50, p50_95 = brute_force_report(samples)
        assert abs(r.giou - giou) < 1e-12
        assert abs(r.ciou - ciou) < 1e-12
        assert abs(r.p50 - p50) < 1e-12
        assert abs(r.p50_95 - p50_95) < 1e-12
