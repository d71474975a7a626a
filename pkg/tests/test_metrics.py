"""Overlap/precision metrics, the integrated tracking cost, and box-file round trips."""

import math
from types import SimpleNamespace

import numpy as np
import pytest

from helm_bench.core import BoundingBox, EvaluationError
from helm_bench.metrics import (
    NORM_PRECISION_THRESHOLDS,
    PRECISION_THRESHOLDS,
    REPORT_COLUMNS,
    SUCCESS_THRESHOLDS,
    CostWeights,
    aggregate_reports,
    evaluate_boxes,
    evaluate_sequence,
    format_boxes,
    format_curves,
    format_report,
    iou,
    load_boxes,
    norm_center_errors,
    norm_precision_at,
    op_at,
    precision_at,
    success_auc,
    success_curve,
    tracking_cost,
)


def random_box(rng) -> BoundingBox:
    return BoundingBox(rng.uniform(-50, 50), rng.uniform(-50, 50),
                       rng.uniform(0, 30), rng.uniform(0, 30))


class TestIou:
    def test_identical(self):
        b = BoundingBox(3.0, 4.0, 10.0, 5.0)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(BoundingBox(0, 0, 2, 2), BoundingBox(10, 10, 2, 2)) == 0.0

    def test_quarter_overlap(self):
        # intersection 1, union 4 + 4 - 1 = 7
        val = iou(BoundingBox(0, 0, 2, 2), BoundingBox(1, 1, 2, 2))
        assert val == pytest.approx(1.0 / 7.0, abs=1e-12)

    def test_integer_pixel_count_cross_check(self):
        a, b = BoundingBox(0, 0, 2, 2), BoundingBox(1, 1, 2, 2)
        # count unit cells on a fine grid covering both boxes
        n = 400  # cells per unit
        xs = (np.arange(3 * n) + 0.5) / n
        ys = (np.arange(3 * n) + 0.5) / n
        X, Y = np.meshgrid(xs, ys)
        in_a = (X > a.x) & (X < a.x + a.w) & (Y > a.y) & (Y < a.y + a.h)
        in_b = (X > b.x) & (X < b.x + b.w) & (Y > b.y) & (Y < b.y + b.h)
        approx = in_a.__and__(in_b).sum() / (in_a | in_b).sum()
        assert iou(a, b) == pytest.approx(approx, abs=1e-3)

    def test_zero_area_union(self):
        z = BoundingBox(0, 0, 0, 0)
        assert iou(z, z) == 0.0

    def test_symmetry_and_range_fuzz(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            a, b = random_box(rng), random_box(rng)
            v = iou(a, b)
            assert v == iou(b, a)
            assert 0.0 <= v <= 1.0


class TestSuccess:
    def test_perfect_tracker(self):
        curve, auc = success_auc(np.ones(10))
        assert auc == 100.0
        assert np.all(curve == 100.0)

    def test_all_zero_overlap(self):
        _, auc = success_auc(np.zeros(10))
        assert auc == pytest.approx(100.0 / 101.0, abs=1e-12)

    def test_single_half_overlap(self):
        _, auc = success_auc(np.array([0.5]))
        assert auc == pytest.approx(51.0 / 101.0 * 100.0, abs=1e-12)

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(5)
        ious = rng.uniform(0, 1, size=777)
        curve, auc = success_auc(ious)
        want = [100.0 * sum(1 for v in ious if v >= k / 100.0) / len(ious) for k in range(101)]
        assert np.allclose(curve, want, atol=0)
        assert auc == pytest.approx(float(np.mean(want)), abs=1e-12)

    def test_curve_non_increasing(self):
        curve = success_curve(np.random.default_rng(1).uniform(0, 1, 200))
        assert np.all(np.diff(curve) <= 0.0)

    def test_empty_rejected(self):
        with pytest.raises(EvaluationError):
            success_auc(np.array([]))


class TestOpAt:
    def test_examples(self):
        assert op_at(np.array([0.6, 0.8]), 0.5) == 100.0
        assert op_at(np.array([0.6, 0.8]), 0.75) == 50.0
        assert op_at(np.array([0.5]), 0.5) == 100.0  # boundary counts

    def test_op50_dominates_op75(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            ious = rng.uniform(0, 1, size=rng.integers(1, 60))
            assert op_at(ious, 0.5) >= op_at(ious, 0.75)


class TestPrecision:
    def test_examples(self):
        assert precision_at(np.zeros(5)) == 100.0
        assert precision_at(np.array([10.0, 30.0])) == 50.0
        assert precision_at(np.array([math.inf, 5.0])) == 50.0

    def test_boundary_counts(self):
        assert precision_at(np.array([20.0])) == 100.0

    def test_empty_rejected(self):
        with pytest.raises(EvaluationError):
            precision_at(np.array([]))


class TestNormPrecision:
    def test_perfect_centers(self):
        gt = [BoundingBox(0, 0, 10, 10)] * 4
        value, curve = norm_precision_at(gt, list(gt))
        assert value == 100.0
        assert curve.shape == (51,)

    def test_hand_arithmetic_counts(self):
        gt = [BoundingBox(100, 100, 50, 40)]
        pred = [BoundingBox(105, 104, 50, 40)]  # center offset (5, 4)
        errs = norm_center_errors(gt, pred)
        assert errs[0] == pytest.approx(math.hypot(5 / 50, 4 / 40), abs=1e-12)
        value, _ = norm_precision_at(gt, pred)
        assert value == 100.0

    def test_hand_arithmetic_excluded(self):
        gt = [BoundingBox(100, 100, 50, 40)]
        pred = [BoundingBox(125, 100, 50, 40)]  # offset (25, 0): e = 0.5
        value, _ = norm_precision_at(gt, pred)
        assert value == 0.0

    def test_degenerate_gt_rejected(self):
        gt = [BoundingBox(0, 0, 0, 10)]
        with pytest.raises(EvaluationError):
            norm_center_errors(gt, [BoundingBox(0, 0, 10, 10)])

    def test_missing_prediction_is_infinite(self):
        errs = norm_center_errors([BoundingBox(0, 0, 10, 10)], [None])
        assert errs[0] == math.inf


def constant_log(n=101, dt=0.02, e_psi=0.0, e_y=0.0, e_d=0.0, T1=0.0, T2=0.0):
    return SimpleNamespace(
        t=np.arange(n) * dt,
        e_psi=np.full(n, e_psi),
        e_y=np.full(n, e_y),
        e_d=np.full(n, e_d),
        T1=np.full(n, T1),
        T2=np.full(n, T2),
    )


class TestTrackingCost:
    def test_zero_log(self):
        assert tracking_cost(constant_log(), CostWeights()) == 0.0

    def test_hand_trapezoid_of_constant(self):
        w = CostWeights(Q_pixel=np.eye(2), Q_distance=1.0, R_effort=1e-4 * np.eye(2))
        log = constant_log(n=201, dt=0.01, e_psi=1.0, e_d=2.0)  # 2 s span
        assert tracking_cost(log, w) == pytest.approx(10.0, abs=1e-9)  # (1+4)*2

    def test_effort_term_linear_in_weight(self):
        base = CostWeights(Q_pixel=np.zeros((2, 2)), Q_distance=0.0, R_effort=np.eye(2))
        double = CostWeights(Q_pixel=np.zeros((2, 2)), Q_distance=0.0, R_effort=2 * np.eye(2))
        log = constant_log(e_psi=0.3, T1=2.0, T2=-1.0)
        assert tracking_cost(log, double) == pytest.approx(2 * tracking_cost(log, base))

    def test_trapezoid_matches_numpy_oracle(self):
        rng = np.random.default_rng(9)
        n = 400
        log = SimpleNamespace(
            t=np.arange(n) * 0.02,
            e_psi=rng.normal(size=n),
            e_y=rng.normal(size=n),
            e_d=rng.normal(size=n),
            T1=rng.normal(size=n),
            T2=rng.normal(size=n),
        )
        w = CostWeights()
        e = np.stack([log.e_psi, log.e_y])
        u = np.stack([log.T1, log.T2])
        integrand = (
            np.einsum("it,ij,jt->t", e, w.Q_pixel, e)
            + w.Q_distance * log.e_d**2
            + np.einsum("it,ij,jt->t", u, w.R_effort, u)
        )
        want = np.trapezoid(integrand, log.t)
        assert tracking_cost(log, w) == pytest.approx(want, rel=1e-12)

    def test_non_uniform_timestamps_rejected(self):
        log = constant_log()
        log.t = np.concatenate([log.t[:-1], [log.t[-1] + 0.01]])
        with pytest.raises(EvaluationError):
            tracking_cost(log, CostWeights())

    def test_too_short_rejected(self):
        with pytest.raises(EvaluationError):
            tracking_cost(constant_log(n=1), CostWeights())

    def test_weight_validation(self):
        from helm_bench.core import ConfigError

        with pytest.raises(ConfigError):
            CostWeights(Q_distance=-1.0)
        with pytest.raises(ConfigError):
            CostWeights(R_effort=np.zeros((2, 2)))


class TestEvaluateBoxes:
    def test_perfect_prediction(self):
        gt = [BoundingBox(float(k), 0.0, 20.0, 20.0) for k in range(30)]
        rep = evaluate_boxes(gt, list(gt))
        assert rep.auc == 100.0
        assert rep.op50 == rep.op75 == rep.precision == rep.norm_precision == 100.0
        assert rep.n_frames == 30

    def test_shifted_prediction_scores_zero(self):
        gt = [BoundingBox(0.0, 0.0, 20.0, 20.0)] * 10
        pred = [BoundingBox(100.0, 0.0, 20.0, 20.0)] * 10
        rep = evaluate_boxes(gt, pred)
        assert rep.op50 == 0.0 and rep.precision == 0.0

    def test_length_mismatch(self):
        gt = [BoundingBox(0, 0, 1, 1)]
        with pytest.raises(EvaluationError):
            evaluate_boxes(gt, gt * 2)

    def test_gt_gaps_excluded_from_scoring(self):
        gt = [BoundingBox(0, 0, 10, 10), None, BoundingBox(0, 0, 10, 10)]
        pred = [BoundingBox(0, 0, 10, 10), BoundingBox(5, 5, 10, 10), None]
        rep = evaluate_boxes(gt, pred)
        assert rep.n_frames == 2  # the frame without ground truth is dropped
        assert rep.op50 == 50.0  # one hit, one missing prediction

    def test_all_gt_missing_rejected(self):
        with pytest.raises(EvaluationError):
            evaluate_boxes([None, None], [None, None])

    def test_translation_invariance(self):
        rng = np.random.default_rng(3)
        gt = [random_box(rng) for _ in range(40)]
        pred = [random_box(rng) for _ in range(40)]
        base = evaluate_boxes(gt, pred)
        moved = evaluate_boxes(
            [BoundingBox(b.x + 17, b.y - 23, b.w, b.h) for b in gt],
            [BoundingBox(b.x + 17, b.y - 23, b.w, b.h) for b in pred],
        )
        assert base.auc == moved.auc
        assert base.precision == moved.precision
        assert base.norm_precision == moved.norm_precision

    def test_uniform_scaling_invariance_split(self):
        rng = np.random.default_rng(4)
        gt = [BoundingBox(rng.uniform(0, 50), rng.uniform(0, 50), 20, 20) for _ in range(40)]
        pred = [BoundingBox(b.x + rng.uniform(-15, 15), b.y + rng.uniform(-15, 15), 20, 20)
                for b in gt]
        s = 3.0
        scale = lambda b: BoundingBox(s * b.x, s * b.y, s * b.w, s * b.h)  # noqa: E731
        base = evaluate_boxes(gt, pred)
        scaled = evaluate_boxes([scale(b) for b in gt], [scale(b) for b in pred])
        assert scaled.auc == pytest.approx(base.auc, abs=1e-12)  # IoU scale-free
        assert scaled.norm_precision == pytest.approx(base.norm_precision, abs=1e-12)
        assert scaled.precision != base.precision  # raw pixel errors scale


class TestAggregate:
    def test_mean_convention(self):
        gt_a = [BoundingBox(0, 0, 10, 10)] * 10
        rep_a = evaluate_boxes(gt_a, list(gt_a))  # AUC 100
        pred_b = [BoundingBox(100, 100, 10, 10)] * 10
        rep_b = evaluate_boxes(gt_a, pred_b)
        combined = aggregate_reports([rep_a, rep_b])
        assert combined.auc == pytest.approx((rep_a.auc + rep_b.auc) / 2)
        assert combined.n_frames == 20

    def test_empty_rejected(self):
        with pytest.raises(EvaluationError):
            aggregate_reports([])


class TestBoxFiles:
    def test_round_trip(self, tmp_path):
        boxes = [BoundingBox(1.25, -3.5, 10.0, 20.0), None, BoundingBox(0, 0, 5, 5)]
        p = tmp_path / "boxes.txt"
        p.write_text(format_boxes(boxes))
        back = load_boxes(p)
        assert back[1] is None
        assert back[0].x == 1.25 and back[0].y == -3.5
        assert back[2].w == 5.0

    def test_separator_tolerance(self, tmp_path):
        p = tmp_path / "boxes.txt"
        p.write_text("1,2,3,4\n5\t6\t7\t8\n9 10 11 12\n")
        boxes = load_boxes(p)
        assert len(boxes) == 3 and boxes[1].x == 5.0 and boxes[2].h == 12.0

    def test_partial_nan_rejected_with_line_number(self, tmp_path):
        p = tmp_path / "boxes.txt"
        p.write_text("1,2,3,4\nnan,2,3,4\n")
        with pytest.raises(EvaluationError, match=r"boxes\.txt:2"):
            load_boxes(p)

    def test_bad_field_count_rejected(self, tmp_path):
        p = tmp_path / "boxes.txt"
        p.write_text("1,2,3\n")
        with pytest.raises(EvaluationError, match=":1"):
            load_boxes(p)

    def test_negative_size_rejected(self, tmp_path):
        p = tmp_path / "boxes.txt"
        p.write_text("1,2,-3,4\n")
        with pytest.raises(EvaluationError):
            load_boxes(p)

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "boxes.txt"
        p.write_text("")
        with pytest.raises(EvaluationError):
            load_boxes(p)

    def test_evaluate_sequence_perfect(self, tmp_path):
        boxes = [BoundingBox(float(k), 2.0, 8.0, 8.0) for k in range(20)]
        (tmp_path / "gt.txt").write_text(format_boxes(boxes))
        (tmp_path / "pred.txt").write_text(format_boxes(boxes))
        rep = evaluate_sequence(tmp_path / "gt.txt", tmp_path / "pred.txt")
        assert rep.auc == 100.0 and rep.n_frames == 20


class TestReportFormatting:
    def _report(self):
        gt = [BoundingBox(0, 0, 10, 10)] * 5
        return evaluate_boxes(gt, list(gt))

    def test_header_matches_columns(self):
        text = format_report([("seq", self._report())])
        assert text.splitlines()[0] == ",".join(REPORT_COLUMNS)

    def test_cells_four_decimals(self):
        line = format_report([("seq", self._report())]).splitlines()[1]
        assert line.split(",")[1] == "100.0000"

    def test_extra_columns_appended(self):
        text = format_report([("s", self._report())], extra={"precision_rel_best": [100.0]})
        head, row = text.splitlines()
        assert head.endswith(",precision_rel_best")
        assert row.endswith(",100.0000")

    def test_curves_long_form(self):
        text = format_curves([("s", self._report())])
        lines = text.splitlines()
        assert lines[0] == "sequence,curve,threshold,value"
        n = len(SUCCESS_THRESHOLDS) + len(PRECISION_THRESHOLDS) + len(NORM_PRECISION_THRESHOLDS)
        assert len(lines) == 1 + n
