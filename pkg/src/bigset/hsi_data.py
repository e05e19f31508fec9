"""Hyperspectral cube I/O and synthetic scene generation.

A cube is a dense H x W x L array of finite reals (stored float64,
C-order). Two on-disk formats are supported: a minimal ENVI-style reader
for external rasters (text header plus flat binary payload), and the
package's own little-endian raw container. Ground-truth masks travel as
8-bit PGM (0 = background, 255 = anomaly) or as a single-column CSV of
0/1 values in row-major order.
"""

from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError, NumericError

RAW_MAGIC = b"HSC1"
PGM_ANOMALY = 255


@dataclass(frozen=True)
class HsiCube:
    """Dense H x W x L spectral image; immutable after construction."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise DataFormatError(f"cube data must be 3-D (H, W, L), got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise NumericError("cube contains non-finite values")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def bands(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class GroundTruth:
    """H x W boolean anomaly labels (True = anomaly)."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2 or min(arr.shape) < 1:
            raise DataFormatError(f"labels must be 2-D (H, W), got shape {arr.shape}")
        arr = np.ascontiguousarray(arr.astype(bool))
        arr.flags.writeable = False
        object.__setattr__(self, "labels", arr)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the synthetic-scene generator.

    The background is a Gaussian mixture over spectra: ``components``
    mean spectra drawn uniformly from [mean_low, mean_high] per band,
    laid out as vertical strips, with per-pixel jitter of standard
    deviation ``scale``. Anomalies are placed at isolated seeded-random
    locations (singles and 2x2 blobs, roughly half the pixels each) and
    displaced from their local background mean by ``contrast * scale``
    on every band. Gaussian noise of ``noise_std`` is added everywhere.
    """

    height: int = 30
    width: int = 30
    bands: int = 20
    components: int = 3
    mean_low: float = 0.2
    mean_high: float = 0.8
    scale: float = 0.02
    anomalies: int = 9
    contrast: float = 5.0
    noise_std: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if min(self.height, self.width, self.bands) < 1:
            raise ValueError("height, width and bands must all be >= 1")
        if self.components < 1:
            raise ValueError("need at least one background component")
        if not self.mean_low <= self.mean_high:
            raise ValueError("mean_low must not exceed mean_high")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.anomalies < 0 or self.anomalies >= self.height * self.width:
            raise ValueError("anomaly count must be in [0, H*W)")
        if self.anomalies >= 0.1 * self.height * self.width:
            raise ValueError("anomalies must stay below 10% of the pixels")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        if self.contrast <= 0:
            raise ValueError("contrast must be positive")


# ---------------------------------------------------------------------------
# ENVI-style reader
# ---------------------------------------------------------------------------

_ENVI_DTYPES = {4: "f4", 12: "u2"}
_ENVI_REQUIRED = ("samples", "lines", "bands", "data type", "interleave", "byte order")


def _parse_envi_header(text: str) -> dict[str, str]:
    """Lowercased key -> raw value map; brace-wrapped values are joined."""
    fields: dict[str, str] = {}
    # Collapse multi-line { ... } blocks so each field is one logical line.
    text = re.sub(r"\{[^}]*\}", lambda m: m.group(0).replace("\n", " "), text)
    for line in text.splitlines():
        line = line.strip()
        if not line or line.upper() == "ENVI" or line.startswith(";"):
            continue
        if "=" not in line:
            continue
        key, value = line.split("=", 1)
        fields[key.strip().lower()] = value.strip().strip("{}").strip()
    return fields


def _find_envi_data_file(header_path: Path) -> Path:
    stem = header_path.with_suffix("")
    candidates = [stem] + [stem.with_suffix(ext) for ext in (".img", ".dat", ".raw", ".bsq", ".bil", ".bip")]
    for cand in candidates:
        if cand.exists() and cand != header_path:
            return cand
    raise DataFormatError(f"no companion data file found for header {header_path}")


def load_envi(header_path) -> HsiCube:
    """Read an ENVI header + flat binary raster into a band-interleaved cube.

    Supports bsq/bil/bip interleaves with 32-bit float or 16-bit
    unsigned integer samples; integers are cast without scaling.
    """
    header_path = Path(header_path)
    if not header_path.exists():
        raise DataFormatError(f"header file does not exist: {header_path}")
    fields = _parse_envi_header(header_path.read_text())

    for key in _ENVI_REQUIRED:
        if key not in fields:
            raise DataFormatError(f"missing header field '{key}' in {header_path}")

    try:
        samples = int(fields["samples"])
        lines = int(fields["lines"])
        bands = int(fields["bands"])
        data_type = int(fields["data type"])
        byte_order = int(fields["byte order"])
    except ValueError as exc:
        raise DataFormatError(f"unparseable numeric header field: {exc}") from exc
    interleave = fields["interleave"].lower()

    if min(samples, lines, bands) < 1:
        raise DataFormatError("samples, lines and bands must all be >= 1")
    if data_type not in _ENVI_DTYPES:
        raise DataFormatError(f"unsupported data type {data_type} (only 4=float32, 12=uint16)")
    if interleave not in ("bsq", "bil", "bip"):
        raise DataFormatError(f"unsupported interleave '{interleave}'")
    if byte_order not in (0, 1):
        raise DataFormatError(f"byte order must be 0 or 1, got {byte_order}")

    data_path = _find_envi_data_file(header_path)
    dtype = np.dtype(("<" if byte_order == 0 else ">") + _ENVI_DTYPES[data_type])
    expected = samples * lines * bands * dtype.itemsize
    actual = data_path.stat().st_size
    if actual != expected:
        raise DataFormatError(
            f"data file {data_path} holds {actual} bytes, expected {expected} "
            f"for {lines}x{samples}x{bands} {dtype.name}"
        )

    flat = np.fromfile(data_path, dtype=dtype)
    if interleave == "bsq":
        arr = flat.reshape(bands, lines, samples).transpose(1, 2, 0)
    elif interleave == "bil":
        arr = flat.reshape(lines, bands, samples).transpose(0, 2, 1)
    else:  # bip
        arr = flat.reshape(lines, samples, bands)
    return HsiCube(arr.astype(np.float64))


# ---------------------------------------------------------------------------
# Raw container
# ---------------------------------------------------------------------------


def save_raw(cube: HsiCube, path) -> None:
    """Write the little-endian raw container (magic, H, W, L, float32 payload).

    The payload is band-sequential; values are narrowed to float32, so
    the roundtrip is bitwise only for float32-representable cubes
    (everything this package produces qualifies).
    """
    path = Path(path)
    payload = np.ascontiguousarray(cube.data.transpose(2, 0, 1), dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC)
        fh.write(struct.pack("<III", cube.height, cube.width, cube.bands))
        fh.write(payload.tobytes())


def load_raw(path) -> HsiCube:
    """Read a cube written by :func:`save_raw`."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 16:
        raise DataFormatError(f"{path}: truncated header ({len(blob)} bytes)")
    if blob[:4] != RAW_MAGIC:
        raise DataFormatError(f"{path}: bad magic {blob[:4]!r}")
    height, width, bands = struct.unpack("<III", blob[4:16])
    expected = 16 + height * width * bands * 4
    if len(blob) != expected:
        raise DataFormatError(f"{path}: payload is {len(blob)} bytes, expected {expected}")
    flat = np.frombuffer(blob, dtype="<f4", offset=16)
    arr = flat.reshape(bands, height, width).transpose(1, 2, 0)
    return HsiCube(arr.astype(np.float64))


# ---------------------------------------------------------------------------
# PGM / CSV ground truth
# ---------------------------------------------------------------------------


def write_pgm(path, values: np.ndarray) -> None:
    """Write a 2-D uint8 array as binary (P5) PGM."""
    arr = np.asarray(values, dtype=np.uint8)
    if arr.ndim != 2:
        raise DataFormatError(f"PGM payload must be 2-D, got shape {arr.shape}")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) PGM into a 2-D uint8 array."""
    blob = Path(path).read_bytes()
    if not blob.startswith(b"P5"):
        raise DataFormatError(f"{path}: not a binary PGM file")
    # Header: magic, width, height, maxval; separated by whitespace, with
    # optional comment lines.
    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DataFormatError(f"{path}: truncated PGM header")
        tokens.append(blob[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise DataFormatError(f"{path}: unparseable PGM header") from exc
    if maxval != 255:
        raise DataFormatError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    if len(blob) - pos != width * height:
        raise DataFormatError(f"{path}: PGM payload size mismatch")
    return np.frombuffer(blob, dtype=np.uint8, offset=pos).reshape(height, width).copy()


def save_ground_truth(gt: GroundTruth, path) -> None:
    """Write labels as PGM with anomalies at 255."""
    write_pgm(path, np.where(gt.labels, PGM_ANOMALY, 0).astype(np.uint8))


def load_ground_truth(path, shape: tuple[int, int] | None = None) -> GroundTruth:
    """Read labels from a PGM file or a single-column 0/1 CSV.

    CSV files carry no dimensions, so ``shape`` (H, W) is required for
    them; it is ignored for PGM.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        if shape is None:
            raise DataFormatError("CSV ground truth needs an explicit (H, W) shape")
        values = []
        for line_no, line in enumerate(path.read_text().splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            if line not in ("0", "1"):
                raise DataFormatError(f"{path}:{line_no}: expected 0 or 1, got {line!r}")
            values.append(line == "1")
        if len(values) != shape[0] * shape[1]:
            raise DataFormatError(
                f"{path}: {len(values)} labels but shape {shape} needs {shape[0] * shape[1]}"
            )
        return GroundTruth(np.array(values, dtype=bool).reshape(shape))
    return GroundTruth(read_pgm(path) != 0)


# ---------------------------------------------------------------------------
# Synthetic scenes
# ---------------------------------------------------------------------------


def _place_anomalies(rng: np.random.Generator, height: int, width: int, count: int) -> np.ndarray:
    """Seeded placement of isolated single pixels and 2x2 blobs.

    Roughly half the anomaly pixels are grouped into 2x2 blobs (as many
    whole blobs as fit into count // 2), the rest are singles. Groups
    keep a 2-pixel margin from each other.
    """
    labels = np.zeros((height, width), dtype=bool)
    if count == 0:
        return labels
    blocked = np.zeros((height, width), dtype=bool)
    n_blobs = (count // 2) // 4
    n_singles = count - 4 * n_blobs
    margin = 2

    def try_place(i0: int, j0: int, size: int) -> bool:
        if i0 + size > height or j0 + size > width:
            return False
        lo_i, hi_i = max(0, i0 - margin), min(height, i0 + size + margin)
        lo_j, hi_j = max(0, j0 - margin), min(width, j0 + size + margin)
        if blocked[lo_i:hi_i, lo_j:hi_j].any():
            return False
        labels[i0 : i0 + size, j0 : j0 + size] = True
        blocked[lo_i:hi_i, lo_j:hi_j] = True
        return True

    for size, n_groups in ((2, n_blobs), (1, n_singles)):
        for _ in range(n_groups):
            for _attempt in range(10000):
                i0 = int(rng.integers(0, height))
                j0 = int(rng.integers(0, width))
                if try_place(i0, j0, size):
                    break
            else:
                raise ValueError(
                    f"could not place {count} isolated anomalies on a {height}x{width} grid"
                )
    return labels


def synth_scene(cfg: SynthConfig) -> tuple[HsiCube, GroundTruth]:
    """Generate a seeded synthetic scene and its ground truth.

    Deterministic for a fixed config; the returned cube is rounded
    through float32 so the raw container roundtrips bitwise.
    """
    rng = np.random.default_rng(cfg.seed)
    height, width, bands = cfg.height, cfg.width, cfg.bands

    means = rng.uniform(cfg.mean_low, cfg.mean_high, size=(cfg.components, bands))
    # Vertical strips give each component a contiguous spatial footprint.
    strip = np.minimum(np.arange(width) * cfg.components // width, cfg.components - 1)
    comp_idx = np.broadcast_to(strip, (height, width))
    data = means[comp_idx] + rng.normal(0.0, cfg.scale, size=(height, width, bands))

    labels = _place_anomalies(rng, height, width, cfg.anomalies)
    if labels.any():
        displacement = cfg.contrast * cfg.scale
        data[labels] = means[comp_idx[labels]] + displacement

    if cfg.noise_std > 0:
        data += rng.normal(0.0, cfg.noise_std, size=data.shape)

    data = data.astype(np.float32).astype(np.float64)
    return HsiCube(data), GroundTruth(labels)
