import numpy as np
import pytest

from wasncal.distance import (
    CLASS_WIDTH, OOR_CLASS, DistanceEstimate, class_to_distance,
    estimate_from_posterior, fuse_node_estimates, mae, oor_f1,
    quantize_distance,
)
from wasncal.errors import UndefinedMetric


def make_estimate(class_index):
    post = np.zeros(32)
    post[class_index] = 1.0
    return estimate_from_posterior(post)


class TestQuantize:
    def test_lower_edge(self):
        assert quantize_distance(0.03) == 0

    def test_beyond_range_is_oor(self):
        assert quantize_distance(3.2) == OOR_CLASS

    def test_mid_value(self):
        assert quantize_distance(1.5) == 15  # floor(1.47 / 0.09581)

    def test_upper_edge_clamps_to_last_class(self):
        assert quantize_distance(3.0) == 30

    def test_below_dmin_clamps_to_zero(self):
        assert quantize_distance(0.005) == 0

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            quantize_distance(0.0)

    def test_class_width(self):
        assert CLASS_WIDTH == pytest.approx(0.09580645, rel=1e-6)


class TestDequantize:
    def test_class_zero_midpoint(self):
        assert class_to_distance(0) == pytest.approx(0.03 + CLASS_WIDTH / 2)

    def test_round_trip_all_classes(self):
        for k in range(31):
            assert quantize_distance(class_to_distance(k)) == k

    def test_round_trip_error_bounded(self):
        rng = np.random.default_rng(0)
        for d in rng.uniform(0.03, 3.0, 500):
            err = abs(class_to_distance(quantize_distance(d)) - d)
            assert err <= CLASS_WIDTH / 2 + 1e-12

    def test_oor_has_no_point_estimate(self):
        assert class_to_distance(OOR_CLASS) is None

    def test_invalid_index(self):
        with pytest.raises(ValueError):
            class_to_distance(32)


class TestEstimate:
    def test_posterior_validation(self):
        with pytest.raises(ValueError):
            estimate_from_posterior(np.ones(32))

    def test_oor_flag(self):
        est = make_estimate(31)
        assert est.is_oor and est.point_estimate is None


class TestFusion:
    def test_majority(self):
        fused = fuse_node_estimates([make_estimate(7), make_estimate(7), make_estimate(9)])
        assert fused.kind == "estimate" and fused.class_index == 7

    def test_disagreement_discards(self):
        fused = fuse_node_estimates([make_estimate(3), make_estimate(12), make_estimate(25)])
        assert fused.kind == "discard"

    def test_any_oor_wins(self):
        fused = fuse_node_estimates([make_estimate(7), make_estimate(7), make_estimate(31)])
        assert fused.kind == "oor"

    def test_wrong_count(self):
        with pytest.raises(ValueError):
            fuse_node_estimates([make_estimate(1)])


class TestMae:
    def test_perfect(self):
        assert mae([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_constant_bias(self):
        truths = [0.5, 1.0, 2.5]
        assert mae([t + 0.1 for t in truths], truths) == pytest.approx(0.1)

    def test_oor_truth_excluded(self):
        assert mae([1.0, 2.0], [1.0, 3.5]) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mae([], [])

    def test_all_excluded_rejected(self):
        with pytest.raises(ValueError):
            mae([None], [1.0])


class TestOorF1:
    def test_perfect_detection(self):
        assert oor_f1([True, False, True], [True, False, True]) == 1.0

    def test_all_negative_predictor(self):
        assert oor_f1([False, False, False], [True, False, True]) == 0.0

    def test_no_positives_in_truth(self):
        with pytest.raises(UndefinedMetric):
            oor_f1([True, False], [False, False])

    def test_partial(self):
        # 1 TP, 1 FP, 1 FN -> P = R = 0.5 -> F1 = 0.5
        f1 = oor_f1([True, True, False, False], [True, False, True, False])
        assert f1 == pytest.approx(0.5)
