"""Normalized mean error and the curves derived from it.

``nme`` divides the mean point error by the inter-ocular distance, the distance
between the outer eye corners (local indices 0 and 9). Over a sample set the
cumulative error distribution (CED), its normalized area up to a threshold
(AUC) and the failure rate above the threshold (FR) summarize accuracy.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from core.errors import DegenerateAnnotationError, ShapeError
from core.landmarks import OUTER_CORNERS, LandmarkSet

logger = logging.getLogger(__name__)

PointsLike = Union[LandmarkSet, np.ndarray]


class EvalConfig(BaseModel):
    """Evaluation settings.

    Attributes:
        threshold (float): NME threshold of AUC and FR.
        ced_max (float): Largest threshold on the reported CED curve.
        ced_steps (int): Number of CED curve intervals.
    """
    model_config = ConfigDict(extra = "forbid")

    threshold : float = 0.05
    ced_max : float = 0.1
    ced_steps : int = 100

    @field_validator("threshold", "ced_max")
    @classmethod
    def _positive(cls, value : float, info) -> float:
        if not value > 0:
            raise ValueError(f"eval.{info.field_name} must be positive")
        return value

    @field_validator("ced_steps")
    @classmethod
    def _steps_positive(cls, value : int) -> int:
        if value < 1:
            raise ValueError("eval.ced_steps must be at least 1")
        return value


class GroupMetrics(BaseModel):
    n : int
    nme_mean : float
    auc : float
    fr : float


class EvalReport(BaseModel):
    """Evaluation summary.

    Attributes:
        n (int): Samples evaluated.
        excluded (int): Samples excluded for a degenerate (zero) inter-ocular distance.
        nme_mean (float): Mean NME.
        auc_0_05 (float): Normalized CED area up to ``threshold``.
        fr_0_05 (float): Fraction of samples with NME above ``threshold``.
        ced (List[Tuple[float, float]]): ``(t, fraction with NME <= t)`` pairs.
        threshold (float): Threshold used for AUC and FR.
        nmes (List[float]): Per-sample NME values in input order.
        groups (Dict[str, GroupMetrics]): The same figures per sample group.
    """
    n : int
    excluded : int = 0
    nme_mean : float
    auc_0_05 : float
    fr_0_05 : float
    ced : List[Tuple[float, float]]
    threshold : float = 0.05
    nmes : List[float] = Field(default_factory = list)
    groups : Dict[str, GroupMetrics] = Field(default_factory = dict)


class Prediction(BaseModel):
    """Predicted landmarks of one image, in its pixel frame."""
    points : List[Tuple[float, float]]
    width : int
    height : int


class PredictionSet(BaseModel):
    """Predictions keyed by image path.

    Attributes:
        checkpoint (str): Checkpoint that produced the predictions.
        predictions (Dict[str, Prediction]): Image path (relative to the input root) to prediction.
    """
    checkpoint : str = ""
    predictions : Dict[str, Prediction] = Field(default_factory = dict)


def _points(value : PointsLike) -> np.ndarray:
    return value.points if isinstance(value, LandmarkSet) else np.asarray(value, dtype = np.float64)


def interocular_distance(points : PointsLike) -> float:
    pts = _points(points)
    return float(np.linalg.norm(pts[OUTER_CORNERS[0]] - pts[OUTER_CORNERS[1]]))


def nme(gt : PointsLike, pr : PointsLike, iod : Optional[float] = None) -> float:
    """Mean point-to-point error divided by the inter-ocular distance.

    Args:
        gt (PointsLike): Ground-truth points [L, 2].
        pr (PointsLike): Predicted points [L, 2] in the same frame.
        iod (Optional[float]): Normalizer; the outer-corner distance of ``gt`` when omitted.

    Raises:
        ShapeError: If the point sets differ in shape.
        DegenerateAnnotationError: If the inter-ocular distance is zero.

    Examples:
        >>> nme(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]]), iod = 10.0)
        0.5
    """
    g, p = _points(gt), _points(pr)
    if g.shape != p.shape or g.ndim != 2 or g.shape[1] != 2:
        raise ShapeError("nme", g.shape, p.shape)
    if iod is None:
        iod = interocular_distance(g)
    if not iod > 0:
        raise DegenerateAnnotationError("inter-ocular distance is zero")
    return float(np.linalg.norm(g - p, axis = 1).mean() / iod)


def ced_curve(nmes : np.ndarray, thresholds : np.ndarray) -> np.ndarray:
    """Fraction of samples with NME <= t for every t."""
    ordered = np.sort(nmes)
    return np.searchsorted(ordered, thresholds, side = "right") / len(ordered)


def ced_area(nmes : np.ndarray, threshold : float) -> float:
    """Area under the empirical CED step curve on [0, threshold], divided by threshold.

    The step curve is traced with a vertical segment at every sample value, so the
    trapezoid rule integrates it exactly.
    """
    ordered = np.sort(nmes)
    n = len(ordered)
    xs, ys = [0.0], [float(np.count_nonzero(ordered <= 0.0)) / n]
    for value in np.unique(ordered[(ordered > 0.0) & (ordered < threshold)]):
        xs.extend([float(value), float(value)])
        ys.extend([ys[-1], float(np.count_nonzero(ordered <= value)) / n])
    xs.append(threshold)
    ys.append(ys[-1])
    return float(np.trapezoid(ys, xs) / threshold)


def ced_auc_fr(nmes : Sequence[float], threshold : float = 0.05, ced_max : float = 0.1, ced_steps : int = 100) -> EvalReport:
    """Summarizes per-sample NMEs.

    Args:
        nmes (Sequence[float]): Per-sample NME values.
        threshold (float): AUC / FR threshold.
        ced_max (float): Largest reported CED threshold.
        ced_steps (int): Number of CED intervals on [0, ced_max].

    Returns:
        EvalReport: The summary (``excluded`` is zero).

    Raises:
        ValueError: If ``nmes`` is empty.

    Examples:
        >>> report = ced_auc_fr([0.01] * 500 + [0.10] * 500)
        >>> round(report.auc_0_05, 12), report.fr_0_05
        (0.4, 0.5)
    """
    values = np.asarray(list(nmes), dtype = np.float64)
    if values.size == 0:
        raise ValueError("cannot summarize an empty NME list")
    thresholds = np.linspace(0.0, max(ced_max, threshold), ced_steps + 1)
    curve = ced_curve(values, thresholds)
    return EvalReport(
        n = int(values.size),
        nme_mean = float(values.mean()),
        auc_0_05 = ced_area(values, threshold),
        fr_0_05 = float(np.count_nonzero(values > threshold)) / values.size,
        ced = [(float(t), float(f)) for t, f in zip(thresholds, curve)],
        threshold = threshold,
        nmes = [float(v) for v in values]
    )


def evaluate_predictions(
    gt : Sequence[PointsLike],
    pr : Sequence[PointsLike],
    config : EvalConfig,
    groups : Optional[Sequence[str]] = None
) -> EvalReport:
    """NME per sample, then CED/AUC/FR overall and per group.

    Samples with a zero inter-ocular distance are excluded, logged and counted.

    Raises:
        ValueError: If the sequences differ in length or no sample remains.
    """
    if len(gt) != len(pr):
        raise ValueError(f"{len(gt)} ground-truth sets but {len(pr)} predictions")
    groups = list(groups) if groups is not None else ["all"] * len(gt)
    values : List[float] = []
    kept_groups : List[str] = []
    excluded = 0
    for index, (g, p) in enumerate(zip(gt, pr)):
        try:
            values.append(nme(g, p))
            kept_groups.append(groups[index])
        except DegenerateAnnotationError as e:
            logger.warning(f"Excluding sample {index}: {e}")
            excluded += 1

    kwargs = dict(threshold = config.threshold, ced_max = config.ced_max, ced_steps = config.ced_steps)
    report = ced_auc_fr(values, **kwargs)
    report.excluded = excluded

    for name in sorted(set(kept_groups)):
        sub = ced_auc_fr([v for v, k in zip(values, kept_groups) if k == name], **kwargs)
        report.groups[name] = GroupMetrics(n = sub.n, nme_mean = sub.nme_mean, auc = sub.auc_0_05, fr = sub.fr_0_05)
    return report


def plot_ced(report : EvalReport, path : Path) -> Path:
    """Draws the CED curve with the threshold marked."""
    ts, fs = zip(*report.ced)
    fig, ax = plt.subplots(figsize = (5, 4), dpi = 100)
    ax.step(ts, fs, where = "post", label = f"all (AUC={report.auc_0_05:.4f})")
    ax.axvline(report.threshold, color = "gray", linestyle = "--", linewidth = 1)
    ax.set_xlim(0, ts[-1])
    ax.set_ylim(0, 1.0)
    ax.set_xlabel("NME")
    ax.set_ylabel("fraction of samples")
    ax.grid(True, alpha = 0.3)
    ax.legend(loc = "lower right")
    fig.tight_layout()
    fig.savefig(path, metadata = {"Software": None})
    plt.close(fig)
    return path


def plot_nme(report : EvalReport, path : Path) -> Path:
    """Draws the sorted per-sample NME values against the threshold."""
    ordered = np.sort(np.asarray(report.nmes))
    fig, ax = plt.subplots(figsize = (5, 4), dpi = 100)
    ax.plot(np.arange(1, len(ordered) + 1), ordered, marker = ".", linewidth = 1)
    ax.axhline(report.threshold, color = "red", linestyle = "--", linewidth = 1)
    ax.set_xlabel("sample (sorted)")
    ax.set_ylabel("NME")
    ax.grid(True, alpha = 0.3)
    fig.tight_layout()
    fig.savefig(path, metadata = {"Software": None})
    plt.close(fig)
    return path
