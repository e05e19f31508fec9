"""Hyperspectral anomaly detection via mask-guided separation training.

The package bundles a synthetic-scene generator, a global Mahalanobis
(RX) baseline, proportion-threshold estimation, a hand-derived
autoencoder training engine with an edge-suppression regularizer, and
ROC/AUC evaluation, plus the ``bigset`` command-line front end.
"""

import os as _os

# Cap BLAS/OpenMP pools before numpy loads; effective when this package
# is imported first (the console script guarantees that).
_threads = _os.environ.get("BIGSET_THREADS")
if _threads:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        _os.environ.setdefault(_var, _threads)
del _os, _threads

__version__ = "0.1.0"

from .errors import BigsetError, DataFormatError, NumericError
from .hsi_data import (
    GroundTruth,
    HsiCube,
    SynthConfig,
    load_envi,
    load_ground_truth,
    load_raw,
    save_ground_truth,
    save_raw,
    synth_scene,
)
from .stats_rx import BackgroundStats, background_stats, mahalanobis_map, relative_distance, rx_detect
from .thresholding import Histogram, TauEstimate, build_histogram, estimate_tau, gamma_transform, unimodal_corner
from .log_regularizer import LOG_KERNEL, log_conv, reflect_pad, suppression_grad, suppression_value
from .autodiff_nn import (
    AdamState,
    AeParams,
    Reconstructor,
    VanillaAutoencoder,
    adam_step,
    ae_backward,
    ae_forward,
    init_adam,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .trainer import (
    TrainConfig,
    TrainResult,
    error_map,
    loss_as,
    loss_br,
    mask_input,
    normalize_cube,
    total_loss,
    train,
    train_plain,
    update_mask,
)
from .evaluation import RocCurve, auc, export_map, roc_curve

__all__ = [
    "__version__",
    "BigsetError",
    "DataFormatError",
    "NumericError",
    "HsiCube",
    "GroundTruth",
    "SynthConfig",
    "load_envi",
    "load_raw",
    "save_raw",
    "load_ground_truth",
    "save_ground_truth",
    "synth_scene",
    "BackgroundStats",
    "background_stats",
    "mahalanobis_map",
    "relative_distance",
    "rx_detect",
    "Histogram",
    "TauEstimate",
    "gamma_transform",
    "build_histogram",
    "unimodal_corner",
    "estimate_tau",
    "LOG_KERNEL",
    "reflect_pad",
    "log_conv",
    "suppression_value",
    "suppression_grad",
    "AeParams",
    "AdamState",
    "Reconstructor",
    "VanillaAutoencoder",
    "init_params",
    "init_adam",
    "ae_forward",
    "ae_backward",
    "adam_step",
    "save_checkpoint",
    "load_checkpoint",
    "TrainConfig",
    "TrainResult",
    "error_map",
    "loss_br",
    "loss_as",
    "total_loss",
    "update_mask",
    "mask_input",
    "normalize_cube",
    "train",
    "train_plain",
    "RocCurve",
    "roc_curve",
    "auc",
    "export_map",
]
