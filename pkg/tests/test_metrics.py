import math

import numpy as np
import pytest

from core.errors import DegenerateAnnotationError, ShapeError
from core.landmarks import LandmarkSet
from core.metrics import (
    EvalConfig, PredictionSet, ced_area, ced_auc_fr, ced_curve, evaluate_predictions,
    interocular_distance, nme, plot_ced, plot_nme,
)


class TestNme:
    def test_identical_sets(self, landmarks64):
        assert nme(landmarks64, landmarks64) == 0.0

    def test_single_point(self):
        assert nme(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]]), iod = 10.0) == 0.5

    def test_constant_offset(self, landmarks64, rng):
        a, b = rng.uniform(-3, 3, size = 2)
        shifted = landmarks64.points + np.array([a, b])
        expected = math.hypot(a, b) / interocular_distance(landmarks64)
        assert nme(landmarks64, shifted) == pytest.approx(expected, rel = 1e-12)

    def test_iod_uses_outer_corners(self, landmarks64):
        assert interocular_distance(landmarks64) == pytest.approx(52.5 - 8.5)

    def test_scale_invariant(self, landmarks64, rng):
        pr = landmarks64.points + rng.normal(size = (12, 2))
        assert nme(landmarks64.points * 2.0, pr * 2.0) == nme(landmarks64.points, pr)
        assert nme(landmarks64.points * 3.7, pr * 3.7) == pytest.approx(nme(landmarks64.points, pr), rel = 1e-12)

    def test_degenerate(self):
        points = np.full((12, 2), 5.0)
        with pytest.raises(DegenerateAnnotationError):
            nme(points, points + 1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            nme(np.zeros((12, 2)), np.zeros((11, 2)))


class TestCed:
    def test_all_zero(self):
        report = ced_auc_fr([0.0] * 10)
        assert (report.auc_0_05, report.fr_0_05, report.nme_mean) == (1.0, 0.0, 0.0)

    def test_all_one(self):
        report = ced_auc_fr([1.0] * 10)
        assert (report.auc_0_05, report.fr_0_05) == (0.0, 1.0)

    def test_two_level_step(self):
        report = ced_auc_fr([0.01] * 500 + [0.10] * 500)
        assert report.auc_0_05 == pytest.approx(0.4, abs = 1e-12)
        assert report.fr_0_05 == 0.5
        assert report.n == 1000
        curve = dict(report.ced)
        assert curve[0.0] == 0.0 and curve[0.1] == 1.0

    def test_value_at_threshold_is_not_a_failure(self):
        report = ced_auc_fr([0.05, 0.06])
        assert report.fr_0_05 == 0.5

    def test_area_matches_fine_quadrature(self, rng):
        nmes = rng.uniform(0, 0.08, size = 37)
        grid = np.linspace(0, 0.05, 200001)
        approx = np.trapezoid(ced_curve(nmes, grid), grid) / 0.05
        assert ced_area(nmes, 0.05) == pytest.approx(approx, abs = 1e-4)

    def test_curve_is_monotone(self, rng):
        report = ced_auc_fr(rng.uniform(0, 0.2, size = 50), ced_steps = 20)
        fractions = [f for _, f in report.ced]
        assert len(fractions) == 21
        assert fractions == sorted(fractions)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ced_auc_fr([])


class TestEvaluate:
    def test_groups_and_exclusions(self, landmarks64):
        degenerate = np.full((12, 2), 10.0)
        gt = [landmarks64, landmarks64, degenerate, landmarks64]
        pr = [landmarks64.points, landmarks64.points + 0.44, degenerate, landmarks64.points + 4.4]
        report = evaluate_predictions(gt, pr, EvalConfig(), ["indoor", "indoor", "outdoor", "outdoor"])
        assert report.n == 3 and report.excluded == 1
        assert set(report.groups) == {"indoor", "outdoor"}
        assert report.groups["indoor"].n == 2 and report.groups["outdoor"].n == 1
        assert report.groups["outdoor"].fr == 1.0
        assert report.nmes[0] == 0.0

    def test_length_mismatch(self, landmarks64):
        with pytest.raises(ValueError):
            evaluate_predictions([landmarks64], [], EvalConfig())

    def test_plots_are_written(self, tmp_path):
        report = ced_auc_fr([0.01, 0.02, 0.07])
        assert plot_ced(report, tmp_path / "ced.png").stat().st_size > 0
        assert plot_nme(report, tmp_path / "nme.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_report_round_trip(self):
        report = ced_auc_fr([0.01, 0.2])
        assert type(report).model_validate_json(report.model_dump_json()) == report

    def test_prediction_set_schema(self):
        data = {"checkpoint": "out/train/checkpoint.json", "predictions": {"a.png": {"points": [[1, 2]] * 12, "width": 64, "height": 64}}}
        predictions = PredictionSet.model_validate(data)
        assert LandmarkSet(np.asarray(predictions.predictions["a.png"].points), 64, 64).points[0, 1] == 2.0


def test_eval_config_bounds():
    with pytest.raises(ValueError):
        EvalConfig(threshold = 0.0)
    with pytest.raises(ValueError):
        EvalConfig(ced_steps = 0)
