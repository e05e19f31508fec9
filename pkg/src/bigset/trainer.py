"""Separation training: masked reconstruction loss, periodic mask
updates from sorted error maps, and the full training loop.

Each training iteration feeds the network the background-masked cube,
optimizes a two-part loss (background reconstruction fidelity on
unmasked pixels plus the weighted edge-suppression penalty on masked
pixels), then refreshes the mask by thresholding the reconstruction
error map at a fixed proportion estimated once before training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import evaluation
from .autodiff_nn import AdamState, AeParams, Reconstructor, VanillaAutoencoder, init_adam, init_params
from .errors import DataFormatError, NumericError
from .hsi_data import GroundTruth, HsiCube
from .log_regularizer import suppression_value, suppression_value_and_grad
from .thresholding import estimate_tau

AUC_TRACE_STRIDE = 10


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the training loop.

    ``lam`` trades background fidelity against anomaly suppression;
    ``gamma`` and ``bins`` feed the proportion-threshold estimate;
    ``tau_override`` skips that estimate entirely when set.
    """

    lam: float = 1e-4
    gamma: float = 2.0
    iterations: int = 5
    epochs_per_iter: int = 150
    lr: float = 1e-3
    eps: float = 1e-8
    seed: int = 0
    hidden: int = 100
    bins: int = 200
    normalize: bool = True
    tau_override: float | None = None

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        if self.iterations < 1 or self.epochs_per_iter < 1:
            raise ValueError("iterations and epochs_per_iter must be >= 1")
        if self.lr <= 0 or self.eps <= 0:
            raise ValueError("lr and eps must be positive")
        if self.hidden < 1 or self.bins < 2:
            raise ValueError("hidden must be >= 1 and bins >= 2")
        if self.tau_override is not None and not 0.0 < self.tau_override <= 1.0:
            raise ValueError("tau_override must lie in (0, 1]")


@dataclass
class TrainResult:
    """Outcome of a training run.

    ``loss_trace`` has one row per epoch with columns (background loss,
    suppression loss, total); ``auc_trace`` rows are (epoch, auc) and
    present only when ground truth was supplied.
    """

    detection_map: np.ndarray
    masks: list[np.ndarray]
    loss_trace: np.ndarray
    auc_trace: np.ndarray | None
    params: AeParams
    tau: float


# ---------------------------------------------------------------------------
# Loss pieces
# ---------------------------------------------------------------------------


def error_map(recon: HsiCube, original: HsiCube) -> np.ndarray:
    """Per-pixel squared Euclidean spectral error, as an H x W map."""
    if recon.data.shape != original.data.shape:
        raise DataFormatError(
            f"shape mismatch: {recon.data.shape} vs {original.data.shape}"
        )
    diff = recon.data - original.data
    return np.einsum("ijl,ijl->ij", diff, diff)


def _check_mask(cube: HsiCube, mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != (cube.height, cube.width):
        raise DataFormatError(
            f"mask shape {mask.shape} does not match cube spatial shape "
            f"{(cube.height, cube.width)}"
        )
    return mask.astype(bool)


def loss_br(recon: HsiCube, original: HsiCube, mask: np.ndarray) -> float:
    """Mean squared reconstruction error over background pixels.

    Normalized by the background pixel count; raises if every pixel is
    masked.
    """
    mask = _check_mask(original, mask)
    if recon.data.shape != original.data.shape:
        raise DataFormatError("reconstruction and original shapes differ")
    background = ~mask
    n_background = int(background.sum())
    if n_background == 0:
        raise NumericError("all pixels are masked; background loss is undefined")
    diff = recon.data - original.data
    return float(np.sum(diff * diff * background[:, :, None]) / n_background)


def loss_as(recon: HsiCube, mask: np.ndarray, eps: float = 1e-8) -> float:
    """Edge-suppression penalty averaged over masked pixels.

    The small ``eps`` keeps the division defined for an empty mask, in
    which case the value is exactly 0.
    """
    mask = _check_mask(recon, mask)
    return suppression_value(recon, mask) / (int(mask.sum()) + eps)


def total_loss(
    recon: HsiCube,
    original: HsiCube,
    mask: np.ndarray,
    lam: float,
    eps: float = 1e-8,
) -> tuple[float, float, float]:
    """Combined loss (total, background, suppression)."""
    br = loss_br(recon, original, mask)
    as_ = loss_as(recon, mask, eps)
    return br + lam * as_, br, as_


def update_mask(errors: np.ndarray, tau: float) -> np.ndarray:
    """Binarize an error map at the tau-quantile threshold.

    The lowest ceil(tau * H * W) sorted values are background; a pixel
    is flagged only when its error is strictly above the threshold
    value, so ties at the threshold stay background.
    """
    errors = np.asarray(errors, dtype=np.float64)
    if errors.size == 0:
        raise DataFormatError("error map is empty")
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    flat = np.sort(errors.ravel())
    k = min(max(math.ceil(tau * flat.size), 1), flat.size)
    threshold = flat[k - 1]
    return errors > threshold


def mask_input(cube: HsiCube, mask: np.ndarray) -> HsiCube:
    """Zero the spectra of masked pixels; background pixels untouched."""
    mask = _check_mask(cube, mask)
    return HsiCube(cube.data * (~mask)[:, :, None])


def normalize_cube(cube: HsiCube) -> HsiCube:
    """Global min-max scaling to [0, 1]; a constant cube maps to zeros."""
    lo = cube.data.min()
    hi = cube.data.max()
    if hi == lo:
        return HsiCube(np.zeros_like(cube.data))
    return HsiCube((cube.data - lo) / (hi - lo))


# ---------------------------------------------------------------------------
# Training loops
# ---------------------------------------------------------------------------


def train(
    cube: HsiCube,
    cfg: TrainConfig,
    gt: GroundTruth | None = None,
    model: Reconstructor | None = None,
    optimizer=None,
) -> TrainResult:
    """Run the full mask-guided training loop and return the detection map.

    The mask starts empty and the proportion threshold is estimated once
    (unless overridden); each iteration trains on the background-masked
    input for ``epochs_per_iter`` epochs, then refreshes the mask from
    the current error map. Deterministic for a fixed config and cube.
    """
    work = normalize_cube(cube) if cfg.normalize else cube
    if cfg.tau_override is not None:
        tau = cfg.tau_override
    else:
        tau = estimate_tau(work, cfg.gamma, cfg.bins).tau
    if model is None:
        params = init_params(work.bands, cfg.hidden, cfg.seed)
        model = VanillaAutoencoder(params)
        optimizer = init_adam(params, lr=cfg.lr)
    elif optimizer is None:
        raise ValueError("a custom model needs its matching optimizer")
    return _run_loop(model, optimizer, work, cfg, tau, gt)


def train_plain(cube: HsiCube, cfg: TrainConfig, gt: GroundTruth | None = None) -> TrainResult:
    """Plain reconstruction training: no mask, no suppression term.

    Equivalent to :func:`train` with one iteration, tau pinned to 1 and
    lam = 0; runs for ``cfg.epochs_per_iter`` epochs.
    """
    plain_cfg = replace(cfg, iterations=1, lam=0.0, tau_override=1.0)
    return train(cube, plain_cfg, gt)


def _run_loop(
    model: Reconstructor,
    optimizer,
    cube: HsiCube,
    cfg: TrainConfig,
    tau: float,
    gt: GroundTruth | None,
) -> TrainResult:
    if gt is not None and gt.labels.shape != (cube.height, cube.width):
        raise DataFormatError("ground truth shape does not match the cube")

    original = cube.data
    mask = np.zeros((cube.height, cube.width), dtype=bool)
    total_epochs = cfg.iterations * cfg.epochs_per_iter
    loss_trace = np.empty((total_epochs, 3))
    auc_rows: list[tuple[int, float]] = []
    masks: list[np.ndarray] = []
    detection = None
    epoch = 0

    for _iteration in range(cfg.iterations):
        net_input = mask_input(cube, mask)
        background = ~mask
        n_background = int(background.sum())
        n_masked = int(mask.sum())
        bg3 = background[:, :, None]

        for _ in range(cfg.epochs_per_iter):
            epoch += 1
            recon = model.forward(net_input)
            diff = recon.data - original
            br = float(np.sum(diff * diff * bg3) / n_background)
            grad_out = (2.0 / n_background) * diff * bg3
            if n_masked:
                raw_value, raw_grad = suppression_value_and_grad(recon, mask)
                as_ = raw_value / (n_masked + cfg.eps)
                if cfg.lam:
                    grad_out += (cfg.lam / (n_masked + cfg.eps)) * raw_grad
            else:
                as_ = 0.0
            total = br + cfg.lam * as_
            loss_trace[epoch - 1] = (br, as_, total)
            if not np.isfinite(total):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}", trace=loss_trace[:epoch].copy()
                )
            model.accumulate_grad(grad_out)
            model.apply_update(optimizer)

            if gt is not None and epoch % AUC_TRACE_STRIDE == 0:
                scores = error_map(recon, cube)
                auc_rows.append((epoch, evaluation.auc(evaluation.roc_curve(scores, gt))))

        recon = model.forward(net_input)
        detection = error_map(recon, cube)
        mask = update_mask(detection, tau)
        masks.append(mask)

    params = model.params if isinstance(model, VanillaAutoencoder) else None
    auc_trace = np.array(auc_rows) if auc_rows else None
    return TrainResult(
        detection_map=detection,
        masks=masks,
        loss_trace=loss_trace,
        auc_trace=auc_trace,
        params=params,
        tau=float(tau),
    )
