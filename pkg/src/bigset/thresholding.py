"""Proportion-threshold estimation from the relative-distance distribution.

The pipeline: squared Mahalanobis distances are rescaled into [0, 1],
sharpened by a power (gamma) transform, binned into a histogram on
[0, 1], and the corner of the unimodal histogram (the point of maximum
perpendicular distance from the peak-to-tail chord) separates the
dominant background population from the minority tail. The returned
proportion is the fraction of samples at or left of that corner, which
is rank-based and therefore independent of the transform.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, NumericError
from .hsi_data import HsiCube
from .stats_rx import relative_distance, rx_detect

DEFAULT_GAMMA = 2.0
DEFAULT_BINS = 200


@dataclass(frozen=True)
class Histogram:
    """Uniform-width histogram over [0, 1]; last bin closed on the right."""

    edges: np.ndarray
    counts: np.ndarray

    @property
    def bin_count(self) -> int:
        return self.counts.shape[0]

    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


@dataclass(frozen=True)
class TauEstimate:
    """Estimated background proportion and the corner it came from."""

    tau: float
    corner_value: float
    gamma: float


def gamma_transform(values: np.ndarray, gamma: float) -> np.ndarray:
    """Elementwise v**gamma for values in [0, 1] and gamma >= 1.

    Monotone non-decreasing; fixes 0 and 1; concentrates mass near zero
    as gamma grows.
    """
    if gamma < 1.0:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    values = np.asarray(values, dtype=np.float64)
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        raise ValueError("gamma transform expects values in [0, 1]")
    return values**gamma


def build_histogram(values: np.ndarray, bins: int = DEFAULT_BINS) -> Histogram:
    """Histogram of [0, 1] values on uniform bins.

    Bins are left-closed half-open except the last, which also includes
    1.0; counts conserve the sample count.
    """
    if bins < 2:
        raise ValueError(f"need at least 2 bins, got {bins}")
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise DataFormatError("cannot histogram an empty sample")
    if values.min() < 0.0 or values.max() > 1.0:
        raise ValueError("histogram expects values in [0, 1]")
    counts, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    return Histogram(edges=edges, counts=counts.astype(np.int64))


def unimodal_corner(hist: Histogram) -> int:
    """Index of the corner bin of a unimodal histogram.

    The corner is the bin strictly after the (unique) peak whose point
    (center, count) lies farthest from the straight line joining the
    peak to the last non-empty bin; ties break toward the smaller index.
    """
    counts = hist.counts.astype(np.float64)
    nonempty = np.flatnonzero(hist.counts)
    if nonempty.size == 0:
        raise NumericError("histogram is empty")
    last = int(nonempty[-1])

    peak_count = hist.counts.max()
    peaks = np.flatnonzero(hist.counts == peak_count)
    if peaks.size > 1:
        raise NumericError(
            f"ambiguous peak: bins {peaks.tolist()} share the maximum count {peak_count}"
        )
    peak = int(peaks[0])
    if peak >= last:
        raise NumericError("peak sits at the last non-empty bin; no descending flank")

    centers = hist.centers()
    x0, y0 = centers[peak], counts[peak]
    x1, y1 = centers[last], counts[last]
    cand = np.arange(peak + 1, last + 1)
    # Perpendicular distance of (x, y) from the chord through
    # (x0, y0) and (x1, y1).
    num = np.abs((y1 - y0) * centers[cand] - (x1 - x0) * counts[cand] + x1 * y0 - y1 * x0)
    dist = num / np.hypot(y1 - y0, x1 - x0)
    return int(cand[np.argmax(dist)])


def estimate_tau(
    cube: HsiCube,
    gamma: float = DEFAULT_GAMMA,
    bins: int = DEFAULT_BINS,
    ridge: float | None = None,
) -> TauEstimate:
    """Estimate the background proportion of a cube.

    Runs the full pipeline (RX distances, relative scaling, gamma
    transform, histogram, corner search) and counts the fraction of
    transformed samples at or below the right edge of the corner bin.
    Deterministic; a saturated estimate of 1.0 (nothing would ever be
    masked) emits a warning.
    """
    distances = relative_distance(rx_detect(cube, ridge=ridge))
    transformed = gamma_transform(distances.ravel(), gamma)
    hist = build_histogram(transformed, bins)
    corner = unimodal_corner(hist)
    corner_value = float(hist.edges[corner + 1])
    tau = float(np.count_nonzero(transformed <= corner_value) / transformed.size)
    if tau >= 1.0:
        warnings.warn(
            "estimated background proportion is 1.0; no pixel will ever be masked",
            RuntimeWarning,
            stacklevel=2,
        )
    return TauEstimate(tau=tau, corner_value=corner_value, gamma=float(gamma))
