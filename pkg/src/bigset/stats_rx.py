"""Global background statistics and Mahalanobis (RX) anomaly scoring.

The background model is the scene-wide mean spectrum and sample
covariance; each pixel is scored by its squared Mahalanobis distance
from that model. ``relative_distance`` rescales a distance map into
[0, 1] for downstream threshold estimation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DataFormatError, NumericError
from .hsi_data import HsiCube

DEFAULT_RIDGE_FACTOR = 1e-6


@dataclass(frozen=True)
class BackgroundStats:
    """Mean spectrum, sample covariance, and the inverse of the ridged
    covariance (precision). ``ridge`` is the diagonal loading that was
    applied before inversion."""

    mean: np.ndarray
    covariance: np.ndarray
    precision: np.ndarray
    ridge: float

    def __post_init__(self):
        bands = self.mean.shape[0]
        if self.covariance.shape != (bands, bands) or self.precision.shape != (bands, bands):
            raise DataFormatError("covariance and precision must be L x L for an L-band mean")
        if self.ridge <= 0:
            raise ValueError("ridge must be positive")

    @property
    def bands(self) -> int:
        return self.mean.shape[0]


def background_stats(cube: HsiCube, ridge: float | None = None) -> BackgroundStats:
    """Estimate the global background model of a cube.

    The covariance uses divisor H*W - 1. When ``ridge`` is None it
    defaults to ``1e-6 * trace(cov) / L``, which keeps the inversion
    defined on rank-deficient scenes; pass an explicit positive value to
    override. A covariance that stays non-positive-definite after
    ridging raises NumericError rather than falling back to a
    pseudo-inverse.
    """
    pixels = cube.data.reshape(-1, cube.bands)
    n = pixels.shape[0]
    if n < 2:
        raise DataFormatError("need at least two pixels to estimate a covariance")

    mean = pixels.mean(axis=0)
    centered = pixels - mean
    cov = centered.T @ centered / (n - 1)
    cov = 0.5 * (cov + cov.T)

    if ridge is None:
        ridge = DEFAULT_RIDGE_FACTOR * float(np.trace(cov)) / cube.bands
    if ridge <= 0:
        raise NumericError(
            "ridge is non-positive (zero-variance cube with default ridge); "
            "pass an explicit ridge"
        )

    ridged = cov + ridge * np.eye(cube.bands)
    try:
        factor = scipy.linalg.cho_factor(ridged, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NumericError(f"ridged covariance is not positive definite: {exc}") from exc
    precision = scipy.linalg.cho_solve(factor, np.eye(cube.bands))
    precision = 0.5 * (precision + precision.T)
    return BackgroundStats(mean=mean, covariance=cov, precision=precision, ridge=float(ridge))


def mahalanobis_map(cube: HsiCube, stats: BackgroundStats) -> np.ndarray:
    """Squared Mahalanobis distance of every pixel, as an H x W map."""
    if stats.bands != cube.bands:
        raise DataFormatError(
            f"stats built for {stats.bands} bands, cube has {cube.bands}"
        )
    centered = cube.data.reshape(-1, cube.bands) - stats.mean
    dist = np.einsum("nl,lk,nk->n", centered, stats.precision, centered)
    # The quadratic form is non-negative for a positive-definite
    # precision; clamp rounding residue near zero.
    return np.maximum(dist, 0.0).reshape(cube.height, cube.width)


def relative_distance(dist_map: np.ndarray) -> np.ndarray:
    """Scale a non-negative map by its maximum into [0, 1].

    An all-zero map comes back all zeros; otherwise the maximum maps to
    exactly 1, which makes the operation idempotent.
    """
    dist_map = np.asarray(dist_map, dtype=np.float64)
    if dist_map.size == 0:
        raise DataFormatError("distance map is empty")
    peak = dist_map.max()
    if peak == 0.0:
        return np.zeros_like(dist_map)
    return dist_map / peak


def rx_detect(cube: HsiCube, ridge: float | None = None) -> np.ndarray:
    """Global Mahalanobis anomaly scores (higher = more anomalous)."""
    return mahalanobis_map(cube, background_stats(cube, ridge))
