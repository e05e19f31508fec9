"""Command-line front end: synthesize scenes, run detectors, evaluate.

Every run writes a flat key=value manifest into its output directory;
feeding that manifest back through ``--config`` reproduces the run
(``meta.*`` keys are informational and ignored on input). Flags override
config-file values, which override built-in defaults.

Exit codes: 0 success, 2 usage/configuration error, 3 data error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__
from .errors import DataFormatError, NumericError
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
from .evaluation import auc, export_map, export_roc_csv, roc_curve
from .stats_rx import rx_detect
from .trainer import TrainConfig, TrainResult, normalize_cube, train, train_plain

import numpy as np

_SYNTH_KEYS = {
    "height": int,
    "width": int,
    "bands": int,
    "components": int,
    "anomalies": int,
    "contrast": float,
    "noise": float,
    "mean_low": float,
    "mean_high": float,
    "scale": float,
    "seed": int,
}

_DETECT_KEYS = {
    "input": str,
    "gt": str,
    "detector": str,
    "lambda": float,
    "gamma": float,
    "iterations": int,
    "epochs": int,
    "lr": float,
    "seed": int,
    "hidden": int,
    "bins": int,
    "tau_override": float,
    "normalize": str,
}

_TRAIN_FLAGS_BY_DETECTOR = {
    "bigset": {
        "lambda",
        "gamma",
        "iterations",
        "epochs",
        "lr",
        "seed",
        "hidden",
        "bins",
        "tau_override",
        "normalize",
    },
    "plain-ae": {"epochs", "lr", "seed", "hidden", "normalize"},
    "rx": {"normalize"},
}


def _parse_config_file(path: Path, allowed: dict[str, type]) -> dict[str, object]:
    """Read a flat key=value config; unknown keys are errors, meta.*
    keys are ignored."""
    if not path.exists():
        raise DataFormatError(f"config file does not exist: {path}")
    values: dict[str, object] = {}
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_no}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("meta."):
            continue
        if key not in allowed:
            raise ValueError(f"{path}:{line_no}: unknown config key '{key}'")
        try:
            values[key] = allowed[key](value)
        except ValueError as exc:
            raise ValueError(f"{path}:{line_no}: bad value for '{key}': {exc}") from exc
    return values


def _resolve(args: argparse.Namespace, keys: dict[str, type]) -> dict[str, object]:
    """Merge explicit CLI flags over config-file values."""
    merged: dict[str, object] = {}
    if args.config is not None:
        merged.update(_parse_config_file(Path(args.config), keys))
    for key in keys:
        flag_value = getattr(args, key.replace("-", "_"), None)
        if flag_value is not None:
            merged[key] = flag_value
    return merged


def _parse_normalize(value: str) -> bool:
    if value not in ("on", "off"):
        raise ValueError(f"normalize must be 'on' or 'off', got {value!r}")
    return value == "on"


def _write_manifest(out_dir: Path, command: str, values: dict[str, object], started: float) -> None:
    lines = [
        f"meta.tool = bigset {__version__}",
        f"meta.command = {command}",
        f"meta.out_dir = {out_dir}",
        f"meta.duration_s = {time.perf_counter() - started:.3f}",
    ]
    for key, value in values.items():
        if value is None:
            continue
        if isinstance(value, bool):
            value = "on" if value else "off"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    (out_dir / "manifest.txt").write_text("\n".join(lines) + "\n")


def _load_cube(path_str: str) -> HsiCube:
    path = Path(path_str)
    if not path.exists():
        raise DataFormatError(f"input path does not exist: {path}")
    if path.suffix.lower() == ".hdr":
        return load_envi(path)
    return load_raw(path)


def _load_gt(path_str: str, shape: tuple[int, int]) -> GroundTruth:
    path = Path(path_str)
    if not path.exists():
        raise DataFormatError(f"ground-truth path does not exist: {path}")
    gt = load_ground_truth(path, shape=shape)
    if gt.labels.shape != shape:
        raise DataFormatError(
            f"ground truth shape {gt.labels.shape} does not match data shape {shape}"
        )
    return gt


def _save_score_map(scores: np.ndarray, out_dir: Path, stem: str) -> None:
    cube = HsiCube(scores[:, :, None])
    save_raw(cube, out_dir / f"{stem}.raw")
    export_map(scores, out_dir / f"{stem}.pgm")


def _write_trace_csv(path: Path, result: TrainResult) -> None:
    auc_by_epoch = (
        {int(epoch): value for epoch, value in result.auc_trace}
        if result.auc_trace is not None
        else None
    )
    with open(path, "w") as fh:
        header = "epoch,l_br,l_as,total"
        if auc_by_epoch is not None:
            header += ",auc"
        fh.write(header + "\n")
        for idx, (br, as_, total) in enumerate(result.loss_trace, start=1):
            row = f"{idx},{br:.12g},{as_:.12g},{total:.12g}"
            if auc_by_epoch is not None:
                row += f",{auc_by_epoch[idx]:.12g}" if idx in auc_by_epoch else ","
            fh.write(row + "\n")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _cmd_synth(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    values = _resolve(args, _SYNTH_KEYS)
    kwargs = {
        {"noise": "noise_std"}.get(key, key): value
        for key, value in values.items()
    }
    cfg = SynthConfig(**kwargs)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    cube, gt = synth_scene(cfg)
    save_raw(cube, out_dir / "scene.raw")
    save_ground_truth(gt, out_dir / "gt.pgm")

    manifest = {key: getattr(cfg, {"noise": "noise_std"}.get(key, key)) for key in _SYNTH_KEYS}
    _write_manifest(out_dir, "synth", manifest, started)
    print(f"wrote {out_dir / 'scene.raw'} ({cfg.height}x{cfg.width}x{cfg.bands}, "
          f"{cfg.anomalies} anomaly pixels)")
    return 0


def _check_detector_flags(detector: str, values: dict[str, object]) -> None:
    allowed = _TRAIN_FLAGS_BY_DETECTOR[detector] | {"input", "gt", "detector"}
    offending = sorted(set(values) - allowed)
    if offending:
        raise ValueError(
            f"option(s) {', '.join(offending)} do not apply to detector '{detector}'"
        )


def _cmd_detect(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    values = _resolve(args, _DETECT_KEYS)
    if "input" not in values:
        raise ValueError("an input cube is required (--input or config)")
    detector = values.get("detector", "bigset")
    if detector not in _TRAIN_FLAGS_BY_DETECTOR:
        raise ValueError(f"unknown detector '{detector}'")
    _check_detector_flags(detector, values)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cube = _load_cube(str(values["input"]))
    gt = None
    if "gt" in values:
        gt = _load_gt(str(values["gt"]), (cube.height, cube.width))

    normalize = _parse_normalize(str(values.get("normalize", "on")))

    if detector == "rx":
        work = normalize_cube(cube) if normalize else cube
        scores = rx_detect(work)
        _save_score_map(scores, out_dir, "detection_map")
    else:
        cfg = TrainConfig(
            lam=float(values.get("lambda", 1e-4)),
            gamma=float(values.get("gamma", 2.0)),
            iterations=int(values.get("iterations", 5)),
            epochs_per_iter=int(values.get("epochs", 150)),
            lr=float(values.get("lr", 1e-3)),
            seed=int(values.get("seed", 0)),
            hidden=int(values.get("hidden", 100)),
            bins=int(values.get("bins", 200)),
            normalize=normalize,
            tau_override=(
                float(values["tau_override"]) if "tau_override" in values else None
            ),
        )
        if detector == "bigset":
            result = train(cube, cfg, gt)
            (out_dir / "tau.txt").write_text(f"tau = {result.tau!r}\n")
            from .hsi_data import write_pgm

            for idx, mask in enumerate(result.masks, start=1):
                write_pgm(out_dir / f"mask_{idx:02d}.pgm", np.where(mask, 255, 0).astype(np.uint8))
        else:
            result = train_plain(cube, cfg, gt)
        _save_score_map(result.detection_map, out_dir, "detection_map")
        _write_trace_csv(out_dir / "trace.csv", result)

    manifest = dict(values)
    manifest["detector"] = detector
    manifest["normalize"] = normalize
    manifest["input"] = str(Path(str(values["input"])).resolve())
    if "gt" in values:
        manifest["gt"] = str(Path(str(values["gt"])).resolve())
    _write_manifest(out_dir, "detect", manifest, started)
    print(f"wrote {out_dir / 'detection_map.raw'}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    scores_path = Path(args.scores)
    if not scores_path.exists():
        raise DataFormatError(f"scores path does not exist: {scores_path}")
    score_cube = load_raw(scores_path)
    if score_cube.bands != 1:
        raise DataFormatError(
            f"score container must hold a single band, got {score_cube.bands}"
        )
    scores = score_cube.data[:, :, 0]
    gt = _load_gt(args.gt, scores.shape)

    curve = roc_curve(scores, gt)
    value = auc(curve)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    export_roc_csv(curve, out_dir / "roc.csv")
    _write_manifest(
        out_dir,
        "eval",
        {"scores": str(scores_path.resolve()), "gt": str(Path(args.gt).resolve())},
        started,
    )
    print(f"AUC: {value:.4f}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bigset",
        description="Hyperspectral anomaly detection: mask-guided separation "
        "training, RX baseline, synthetic scenes, ROC/AUC evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"bigset {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic scene")
    p_synth.add_argument("--out-dir", required=True)
    p_synth.add_argument("--config", default=None, help="flat key=value config file")
    p_synth.add_argument("--height", type=int, default=None)
    p_synth.add_argument("--width", type=int, default=None)
    p_synth.add_argument("--bands", type=int, default=None)
    p_synth.add_argument("--components", type=int, default=None)
    p_synth.add_argument("--anomalies", type=int, default=None)
    p_synth.add_argument("--contrast", type=float, default=None)
    p_synth.add_argument("--noise", type=float, default=None)
    p_synth.add_argument("--mean-low", type=float, default=None)
    p_synth.add_argument("--mean-high", type=float, default=None)
    p_synth.add_argument("--scale", type=float, default=None)
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.set_defaults(func=_cmd_synth)

    p_detect = sub.add_parser("detect", help="run a detector on a cube")
    p_detect.add_argument("--input", default=None, help="raw container or ENVI .hdr")
    p_detect.add_argument("--gt", default=None, help="optional ground truth (enables AUC trace)")
    p_detect.add_argument("--out-dir", required=True)
    p_detect.add_argument("--config", default=None, help="flat key=value config file")
    p_detect.add_argument("--detector", choices=sorted(_TRAIN_FLAGS_BY_DETECTOR), default=None)
    p_detect.add_argument("--lambda", dest="lambda_", type=float, default=None)
    p_detect.add_argument("--gamma", type=float, default=None)
    p_detect.add_argument("--iterations", type=int, default=None)
    p_detect.add_argument("--epochs", type=int, default=None)
    p_detect.add_argument("--lr", type=float, default=None)
    p_detect.add_argument("--seed", type=int, default=None)
    p_detect.add_argument("--hidden", type=int, default=None)
    p_detect.add_argument("--bins", type=int, default=None)
    p_detect.add_argument("--tau-override", type=float, default=None)
    p_detect.add_argument("--normalize", choices=("on", "off"), default=None)
    p_detect.set_defaults(func=_cmd_detect)

    p_eval = sub.add_parser("eval", help="score a detection map against ground truth")
    p_eval.add_argument("--scores", required=True, help="raw container with one band")
    p_eval.add_argument("--gt", required=True)
    p_eval.add_argument("--out-dir", required=True)
    p_eval.set_defaults(func=_cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "lambda_", None) is not None:
        setattr(args, "lambda", args.lambda_)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
