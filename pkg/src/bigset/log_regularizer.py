"""Second-order edge regularizer used to suppress masked anomalies.

A fixed 5x5 Laplacian-of-Gaussian template is convolved with every band
(reflect padding of 2 keeps the spatial size), and the squared response
at masked pixels is the suppression penalty. Because the penalty feeds a
hand-derived training loop, this module also provides its exact gradient
with respect to the reconstructed cube: the adjoint of pad-then-convolve,
i.e. a full convolution followed by folding padded positions back onto
their reflected interior sources.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import convolve2d

from .errors import DataFormatError
from .hsi_data import HsiCube

PAD = 2

# Zero-sum, flip- and transpose-symmetric template; symmetry makes
# convolution and correlation coincide.
LOG_KERNEL = np.array(
    [
        [-2, -4, -4, -4, -2],
        [-4, 0, 8, 0, -4],
        [-4, 8, 24, 8, -4],
        [-4, 0, 8, 0, -4],
        [-2, -4, -4, -4, -2],
    ],
    dtype=np.int64,
)

_KERNEL_F = LOG_KERNEL.astype(np.float64)


def reflect_index(i: np.ndarray, n: int) -> np.ndarray:
    """Map (possibly out-of-range) indices onto [0, n) by mirror
    reflection about the edge samples, repeating as needed; n = 1 maps
    everything to 0."""
    i = np.asarray(i)
    if n == 1:
        return np.zeros_like(i)
    period = 2 * (n - 1)
    j = np.mod(i, period)
    return np.where(j >= n, period - j, j)


def reflect_pad(band: np.ndarray, pad: int = PAD) -> np.ndarray:
    """Mirror-pad a 2-D array, excluding the edge sample from the mirror."""
    band = np.asarray(band, dtype=np.float64)
    if band.ndim != 2:
        raise DataFormatError(f"expected a 2-D band, got shape {band.shape}")
    rows = reflect_index(np.arange(-pad, band.shape[0] + pad), band.shape[0])
    cols = reflect_index(np.arange(-pad, band.shape[1] + pad), band.shape[1])
    return band[np.ix_(rows, cols)]


def _conv_band(band: np.ndarray) -> np.ndarray:
    return convolve2d(reflect_pad(band), _KERNEL_F, mode="valid")


def _conv_cube(data: np.ndarray) -> np.ndarray:
    out = np.empty_like(data)
    for b in range(data.shape[2]):
        out[:, :, b] = _conv_band(data[:, :, b])
    return out


def log_conv(cube: HsiCube) -> HsiCube:
    """Filter every band with the edge template at unchanged spatial size."""
    return HsiCube(_conv_cube(cube.data))


def _adjoint_band(response: np.ndarray) -> np.ndarray:
    """Adjoint of pad-then-valid-convolve for one band.

    Full convolution spreads the response onto padded coordinates; the
    fold accumulates each padded cell onto the interior index its
    reflection came from.
    """
    height, width = response.shape
    full = convolve2d(response, _KERNEL_F, mode="full")
    rows = reflect_index(np.arange(-PAD, height + PAD), height)
    cols = reflect_index(np.arange(-PAD, width + PAD), width)
    out = np.zeros((height, width))
    np.add.at(out, (rows[:, None], cols[None, :]), full)
    return out


def _adjoint_cube(responses: np.ndarray) -> np.ndarray:
    out = np.empty_like(responses)
    for b in range(responses.shape[2]):
        out[:, :, b] = _adjoint_band(responses[:, :, b])
    return out


def _check_mask(data: np.ndarray, mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != data.shape[:2]:
        raise DataFormatError(
            f"mask shape {mask.shape} does not match spatial shape {data.shape[:2]}"
        )
    return mask.astype(bool)


def suppression_value(recon: HsiCube, mask: np.ndarray) -> float:
    """Sum of squared edge responses over masked pixels, all bands."""
    value, _ = _value_and_masked_response(recon, mask)
    return value


def suppression_grad(recon: HsiCube, mask: np.ndarray) -> np.ndarray:
    """Exact gradient of :func:`suppression_value` w.r.t. the cube."""
    _, masked = _value_and_masked_response(recon, mask)
    return 2.0 * _adjoint_cube(masked)


def suppression_value_and_grad(recon: HsiCube, mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Value and gradient sharing one filter pass (training fast path)."""
    value, masked = _value_and_masked_response(recon, mask)
    return value, 2.0 * _adjoint_cube(masked)


def _value_and_masked_response(recon: HsiCube, mask: np.ndarray) -> tuple[float, np.ndarray]:
    mask = _check_mask(recon.data, mask)
    response = _conv_cube(recon.data)
    masked = response * mask[:, :, None]
    return float(np.sum(masked * response)), masked
