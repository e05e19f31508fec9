"""Minimal dense network engine: a two-layer ReLU autoencoder with
hand-derived backpropagation and a bias-corrected ADAM optimizer.

The autoencoder acts per pixel on spectra (no spatial mixing inside the
network); all math is double precision so finite-difference gradient
checks hold at tight tolerances. The abstract :class:`Reconstructor`
contract lets the training loop drive other shape-preserving models.
"""

from __future__ import annotations

import abc
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError, NumericError
from .hsi_data import HsiCube

PARAM_FIELDS = ("w1", "b1", "w2", "b2")
CHECKPOINT_MAGIC = b"AEC1"

DEFAULT_HIDDEN = 100
DEFAULT_LR = 1e-3
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_ADAM_EPS = 1e-8


@dataclass
class AeParams:
    """Weights and biases of the two-layer autoencoder.

    w1: (hidden, L), b1: (hidden,), w2: (L, hidden), b2: (L,).
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        hidden, bands = self.w1.shape
        if self.b1.shape != (hidden,) or self.w2.shape != (bands, hidden) or self.b2.shape != (bands,):
            raise DataFormatError("inconsistent parameter shapes")
        for name in PARAM_FIELDS:
            if not np.isfinite(getattr(self, name)).all():
                raise NumericError(f"non-finite values in parameter {name}")

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @property
    def bands(self) -> int:
        return self.w1.shape[1]

    def as_dict(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_FIELDS}


@dataclass
class AdamState:
    """First/second-moment accumulators and hyperparameters."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    eps: float = DEFAULT_ADAM_EPS
    lr: float = DEFAULT_LR


@dataclass
class ForwardCache:
    """Activations stashed by the forward pass for exact backprop."""

    x: np.ndarray  # (N, L) network input pixels
    z1: np.ndarray  # (N, hidden) pre-activations
    h: np.ndarray  # (N, hidden) ReLU outputs
    spatial: tuple[int, int]


def init_params(bands: int, hidden: int = DEFAULT_HIDDEN, seed: int = 0) -> AeParams:
    """Fan-balanced uniform weights, zero biases, deterministic per seed."""
    if hidden < 1:
        raise ValueError(f"hidden must be >= 1, got {hidden}")
    if bands < 1:
        raise ValueError(f"bands must be >= 1, got {bands}")
    rng = np.random.default_rng(seed)
    limit = np.sqrt(6.0 / (bands + hidden))
    return AeParams(
        w1=rng.uniform(-limit, limit, size=(hidden, bands)),
        b1=np.zeros(hidden),
        w2=rng.uniform(-limit, limit, size=(bands, hidden)),
        b2=np.zeros(bands),
    )


def init_adam(
    params: AeParams,
    lr: float = DEFAULT_LR,
    beta1: float = DEFAULT_BETA1,
    beta2: float = DEFAULT_BETA2,
    eps: float = DEFAULT_ADAM_EPS,
) -> AdamState:
    if lr <= 0 or eps <= 0 or not (0 < beta1 < 1) or not (0 < beta2 < 1):
        raise ValueError("invalid optimizer hyperparameters")
    zeros = {name: np.zeros_like(arr) for name, arr in params.as_dict().items()}
    return AdamState(
        m=zeros,
        v={name: np.zeros_like(arr) for name, arr in params.as_dict().items()},
        beta1=beta1,
        beta2=beta2,
        eps=eps,
        lr=lr,
    )


def ae_forward(params: AeParams, cube: HsiCube) -> tuple[HsiCube, ForwardCache]:
    """Per-pixel reconstruction: w2 @ relu(w1 @ x + b1) + b2."""
    if cube.bands != params.bands:
        raise DataFormatError(
            f"cube has {cube.bands} bands, parameters expect {params.bands}"
        )
    x = cube.data.reshape(-1, cube.bands)
    z1 = x @ params.w1.T + params.b1
    h = np.maximum(z1, 0.0)
    out = h @ params.w2.T + params.b2
    recon = HsiCube(out.reshape(cube.data.shape))
    return recon, ForwardCache(x=x, z1=z1, h=h, spatial=(cube.height, cube.width))


def ae_backward(params: AeParams, cache: ForwardCache, grad_out: np.ndarray) -> dict[str, np.ndarray]:
    """Exact parameter gradients given d(loss)/d(reconstruction).

    ``grad_out`` is cube-shaped (H, W, L) and is summed over pixels; the
    ReLU uses subgradient 0 at exactly 0.
    """
    grad_out = np.asarray(grad_out, dtype=np.float64)
    expected = cache.spatial + (params.bands,)
    if grad_out.shape != expected:
        raise DataFormatError(
            f"output gradient shape {grad_out.shape} does not match cache {expected}"
        )
    if cache.x.shape != (grad_out.shape[0] * grad_out.shape[1], params.bands) or cache.z1.shape[1] != params.hidden:
        raise DataFormatError("stale forward cache for these parameters")

    g = grad_out.reshape(-1, params.bands)
    grad_w2 = g.T @ cache.h
    grad_b2 = g.sum(axis=0)
    g_hidden = (g @ params.w2) * (cache.z1 > 0.0)
    grad_w1 = g_hidden.T @ cache.x
    grad_b1 = g_hidden.sum(axis=0)
    return {"w1": grad_w1, "b1": grad_b1, "w2": grad_w2, "b2": grad_b2}


def adam_step(params: AeParams, grads: dict[str, np.ndarray], state: AdamState) -> tuple[AeParams, AdamState]:
    """One bias-corrected ADAM update, in place; returns both objects.

    Rejects non-finite gradients, naming the offending tensor.
    """
    for name in PARAM_FIELDS:
        grad = grads[name]
        if grad.shape != getattr(params, name).shape:
            raise DataFormatError(f"gradient shape mismatch for {name}")
        if not np.isfinite(grad).all():
            raise NumericError(f"non-finite gradient in {name}")

    state.t += 1
    bias1 = 1.0 - state.beta1**state.t
    bias2 = 1.0 - state.beta2**state.t
    for name in PARAM_FIELDS:
        grad = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        update = (m / bias1) / (np.sqrt(v / bias2) + state.eps)
        getattr(params, name)[...] -= state.lr * update
    return params, state


class Reconstructor(abc.ABC):
    """Contract for any shape-preserving background reconstructor."""

    @abc.abstractmethod
    def forward(self, cube: HsiCube) -> HsiCube:
        """Reconstruct the cube; output shape must equal input shape."""

    @abc.abstractmethod
    def accumulate_grad(self, grad_out: np.ndarray) -> dict[str, np.ndarray]:
        """Backpropagate a cube-shaped output gradient into parameter
        gradients (stored for the next update and returned)."""

    @abc.abstractmethod
    def apply_update(self, optimizer) -> None:
        """Apply the stored gradients with the given optimizer state."""


class VanillaAutoencoder(Reconstructor):
    """The two-layer ReLU autoencoder behind the Reconstructor contract."""

    def __init__(self, params: AeParams):
        self.params = params
        self._cache: ForwardCache | None = None
        self._grads: dict[str, np.ndarray] | None = None

    def forward(self, cube: HsiCube) -> HsiCube:
        recon, self._cache = ae_forward(self.params, cube)
        return recon

    def accumulate_grad(self, grad_out: np.ndarray) -> dict[str, np.ndarray]:
        if self._cache is None:
            raise DataFormatError("accumulate_grad called before forward")
        self._grads = ae_backward(self.params, self._cache, grad_out)
        return self._grads

    def apply_update(self, optimizer: AdamState) -> None:
        if self._grads is None:
            raise DataFormatError("apply_update called before accumulate_grad")
        adam_step(self.params, self._grads, optimizer)
        self._grads = None


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(path, params: AeParams, state: AdamState | None = None) -> None:
    """Write parameters (and optionally optimizer state) as little-endian
    float64: magic, L, hidden, then w1, b1, w2, b2; the optimizer block
    appends t, beta1, beta2, eps, lr and the moment tensors."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", params.bands, params.hidden))
        for name in PARAM_FIELDS:
            fh.write(np.ascontiguousarray(getattr(params, name), dtype="<f8").tobytes())
        if state is not None:
            fh.write(struct.pack("<Q", state.t))
            fh.write(struct.pack("<dddd", state.beta1, state.beta2, state.eps, state.lr))
            for moments in (state.m, state.v):
                for name in PARAM_FIELDS:
                    fh.write(np.ascontiguousarray(moments[name], dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[AeParams, AdamState | None]:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    blob = Path(path).read_bytes()
    if len(blob) < 12 or blob[:4] != CHECKPOINT_MAGIC:
        raise DataFormatError(f"{path}: not a parameter checkpoint")
    bands, hidden = struct.unpack("<II", blob[4:12])
    shapes = {"w1": (hidden, bands), "b1": (hidden,), "w2": (bands, hidden), "b2": (bands,)}
    offset = 12

    def take(shape: tuple[int, ...]) -> np.ndarray:
        nonlocal offset
        count = int(np.prod(shape))
        end = offset + 8 * count
        if end > len(blob):
            raise DataFormatError(f"{path}: truncated checkpoint")
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
        offset = end
        return arr

    params = AeParams(**{name: take(shapes[name]) for name in PARAM_FIELDS})
    if offset == len(blob):
        return params, None

    if len(blob) < offset + 8 + 32:
        raise DataFormatError(f"{path}: truncated optimizer block")
    (t,) = struct.unpack_from("<Q", blob, offset)
    offset += 8
    beta1, beta2, eps, lr = struct.unpack_from("<dddd", blob, offset)
    offset += 32
    m = {name: take(shapes[name]) for name in PARAM_FIELDS}
    v = {name: take(shapes[name]) for name in PARAM_FIELDS}
    if offset != len(blob):
        raise DataFormatError(f"{path}: trailing bytes in checkpoint")
    return params, AdamState(m=m, v=v, t=t, beta1=beta1, beta2=beta2, eps=eps, lr=lr)
