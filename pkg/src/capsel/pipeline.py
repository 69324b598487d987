"""End-to-end selection pipeline.

One image batch is sampled once and reused for every family member, so score
differences reflect capacity changes rather than sampling noise. Weights for
member ``i`` come from the sub-seed stream (base_seed, 1, i), so members draw
independent weights while the whole run stays reproducible from one seed.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import DatasetSample, load_dataset, sample_images
from .errors import NumericalError, ValidationError
from .family import FamilyConfig, NetConfig, build_family, default_stage_count
from .network import init_network, input_gradient
from .sensitivity import (
    DEFAULT_MODE,
    SelectionReport,
    SensitivityCurve,
    detect_collapse,
    sensitivity_score,
    with_provenance,
)

__all__ = ["RunConfig", "run_selection", "emit_report", "emit_curve_csv", "config_seed"]

_WEIGHT_STREAM = 1


def config_seed(base_seed: int, cap_index: int) -> int:
    """Derived 64-bit weight seed for one family member."""
    ss = np.random.SeedSequence((int(base_seed), _WEIGHT_STREAM, int(cap_index)))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class RunConfig:
    """Everything one selection run needs."""

    data_dir: str | Path
    num_samples: int = 8
    seed: int = 0
    base_channels: int = 32
    max_channels: int = 512
    stages: int | None = None
    in_channels: int | None = None   # None: inferred from the dataset
    out_classes: int = 2
    input_size: tuple[int, int] | None = None  # None: inferred from the dataset
    mode: str = DEFAULT_MODE
    tie_break: str = "largest"
    out_path: str | Path | None = None
    csv_path: str | Path | None = None


def _family_config(rc: RunConfig, ds: DatasetSample) -> FamilyConfig:
    c, h, w = ds.image_shape
    in_channels = rc.in_channels if rc.in_channels is not None else c
    input_size = tuple(rc.input_size) if rc.input_size is not None else (h, w)
    if (in_channels, *input_size) != (c, h, w):
        raise ValidationError(
            f"dataset images are {(c, h, w)}, run config expects "
            f"({in_channels}, {input_size[0]}, {input_size[1]})"
        )
    stages = rc.stages if rc.stages is not None else default_stage_count(input_size)
    return FamilyConfig(
        input_size=input_size,
        base_channels=rc.base_channels,
        max_channels=rc.max_channels,
        stages=stages,
        in_channels=in_channels,
        out_classes=rc.out_classes,
    )


def score_family(configs, fc: FamilyConfig, batch: np.ndarray, base_seed: int) -> list[float]:
    """Sensitivity score of every family member on one shared batch,
    assembled in cap-index order."""
    scores = []
    for cfg in configs:
        net = init_network(cfg, fc, config_seed(base_seed, cfg.cap_index))
        try:
            grad = input_gradient(net, batch)
        except NumericalError as exc:
            raise NumericalError(
                f"config {cfg.cap_index} (cap {cfg.cap}): {exc}", layer=exc.layer
            ) from exc
        scores.append(sensitivity_score(grad))
    return scores


def run_selection(rc: RunConfig) -> tuple[SelectionReport, SensitivityCurve]:
    """Full pipeline: load, sample, score the family, detect, emit."""
    if rc.num_samples < 1:
        raise ValidationError(f"num_samples must be >= 1, got {rc.num_samples}")
    ds = load_dataset(rc.data_dir)
    fc = _family_config(rc, ds)
    configs = build_family(fc)
    batch = sample_images(ds, rc.num_samples, rc.seed)

    scores = score_family(configs, fc, batch, rc.seed)
    curve = SensitivityCurve.from_raw(scores)
    extra = tuple(f"constant image z-scored to zeros: {name}"
                  for name in ds.constant_image_names())
    report = detect_collapse(curve, mode=rc.mode, tie_break=rc.tie_break, configs=configs)
    report = with_provenance(report, seed=rc.seed, num_samples=rc.num_samples,
                             extra_warnings=extra)

    if rc.out_path is not None:
        emit_report(report, curve, rc.out_path)
    if rc.csv_path is not None:
        emit_curve_csv(curve, configs, rc.csv_path)
    return report, curve


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _config_entry(cfg: NetConfig) -> dict:
    return {
        "cap_index": cfg.cap_index,
        "cap": cfg.cap,
        "channels": list(cfg.channels),
        "param_count": cfg.param_count,
    }


def report_payload(report: SelectionReport, curve: SensitivityCurve) -> dict:
    """JSON-ready dict with the fixed report schema."""
    if report.family is None or report.selected is None:
        raise ValidationError("report lacks family configs; run the full pipeline")
    family = []
    for i, cfg in enumerate(report.family):
        entry = _config_entry(cfg)
        entry["s_raw"] = float(curve.raw[i])
        entry["s_norm"] = float(curve.normalized[i])
        family.append(entry)
    return {
        "family": family,
        "variations": [float(v) for v in curve.variations],
        "objective": [{"k": k, "value": float(v)}
                      for k, v in zip(report.candidates, report.objectives)],
        "mode": report.mode,
        "tie_break": report.tie_break,
        "k_star": report.k_star,
        "selected": _config_entry(report.selected),
        "seed": report.seed,
        "num_samples": report.num_samples,
        "warnings": list(report.warnings),
    }


def emit_report(report: SelectionReport, curve: SensitivityCurve, path) -> None:
    """Write the JSON report atomically (temp file + rename)."""
    payload = report_payload(report, curve)
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def emit_curve_csv(curve: SensitivityCurve, configs, path) -> None:
    """Write the plot-ready curve CSV atomically. The variation column holds
    d[i] = |s_norm[i+1] - s_norm[i]| and is empty on the last row."""
    if len(configs) != len(curve):
        raise ValidationError(f"{len(configs)} configs for a curve of {len(curve)} scores")
    lines = ["cap_index,cap,param_count,S_raw,S_norm,d"]
    for i, cfg in enumerate(configs):
        d = repr(float(curve.variations[i])) if i < len(curve.variations) else ""
        lines.append(
            f"{cfg.cap_index},{cfg.cap},{cfg.param_count},"
            f"{float(curve.raw[i])!r},{float(curve.normalized[i])!r},{d}"
        )
    _atomic_write(path, "\n".join(lines) + "\n")
