"""ROC/AUC evaluation of score maps and detection-map export.

A pixel counts as detected when its score is strictly above the swept
threshold, matching the strict inequality of the mask update; with that
convention the trapezoidal AUC equals the tie-aware rank statistic
(ties count one half).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError
from .hsi_data import GroundTruth, write_pgm


@dataclass(frozen=True)
class RocCurve:
    """Ordered (false-alarm rate, detection probability) points from
    (0, 0) to (1, 1), both coordinates non-decreasing."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise DataFormatError("a curve needs at least two (p_f, p_d) points")
        pts = np.ascontiguousarray(pts)
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)


def roc_curve(scores: np.ndarray, gt: GroundTruth) -> RocCurve:
    """Sweep thresholds over the distinct score values.

    Requires both classes in the ground truth; the degenerate endpoints
    (0, 0) and (1, 1) are always present.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != gt.labels.shape:
        raise DataFormatError(
            f"scores shape {scores.shape} does not match labels {gt.labels.shape}"
        )
    labels = gt.labels.ravel()
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataFormatError("ground truth must contain both classes")

    flat = scores.ravel()
    order = np.argsort(-flat, kind="stable")
    sorted_scores = flat[order]
    sorted_labels = labels[order]

    cum_tp = np.cumsum(sorted_labels)
    cum_fp = np.cumsum(~sorted_labels)
    # Last index of each run of equal scores; predicting "score > value"
    # includes the whole run.
    run_ends = np.flatnonzero(np.diff(sorted_scores) != 0)
    tp = np.concatenate(([0], cum_tp[run_ends], [n_pos]))
    fp = np.concatenate(([0], cum_fp[run_ends], [n_neg]))
    points = np.column_stack((fp / n_neg, tp / n_pos))
    return RocCurve(points)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve, integrating over the
    false-alarm axis."""
    pf = curve.points[:, 0]
    pd = curve.points[:, 1]
    return float(np.sum((pf[1:] - pf[:-1]) * (pd[1:] + pd[:-1])) * 0.5)


def export_map(score_map: np.ndarray, path) -> None:
    """Write a score map as an 8-bit PGM after min-max scaling.

    Constant maps export as all zeros.
    """
    arr = np.asarray(score_map, dtype=np.float64)
    if arr.ndim != 2:
        raise DataFormatError(f"score map must be 2-D, got shape {arr.shape}")
    lo, hi = arr.min(), arr.max()
    if hi == lo:
        scaled = np.zeros(arr.shape, dtype=np.uint8)
    else:
        scaled = np.rint((arr - lo) / (hi - lo) * 255.0).astype(np.uint8)
    write_pgm(path, scaled)


def export_roc_csv(curve: RocCurve, path) -> None:
    """Write the curve as CSV with columns p_f, p_d."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p_f", "p_d"])
        for pf, pd in curve.points:
            writer.writerow([f"{pf:.10g}", f"{pd:.10g}"])
