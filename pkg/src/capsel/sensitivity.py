"""Sensitivity scoring and collapse-boundary detection.

Raw score: RMS over the batch of each image's full gradient L2 norm,
``sqrt(mean_k ||G_k||_2^2)``. Scores are min-max normalized across the family
(ordered widest to narrowest) and the boundary is placed by splitting the
sequence of absolute consecutive variations ``d``.

Split objectives for a candidate ``k`` (variations indexed 0..N-2, both
regions required nonempty, so candidates run 1..N-2):

* ``tv-diff``    sum(d[k:]) - sum(d[:k]). The literal total-variation
                 difference. On strictly positive ``d`` it is strictly
                 decreasing in ``k`` and therefore always picks the smallest
                 candidate; kept selectable because it is the primary
                 definition, but degenerate in practice.
* ``mean-split`` mean(d[k:]) - mean(d[:k]). Default; compares per-step
                 variation levels so region sizes do not bias the score.
* ``max-jump``   d[k]; the boundary sits at the single largest variation.

Ties break toward the largest k (the smallest model) by default.
"""

from __future__ import annotations

import warnings as _warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import DegenerateCurveWarning, ValidationError
from .family import NetConfig
from .tensor import check_finite

__all__ = [
    "MODES",
    "TIE_BREAKS",
    "DEFAULT_MODE",
    "SensitivityCurve",
    "SelectionReport",
    "sensitivity_score",
    "normalize_scores",
    "local_variations",
    "split_objective",
    "detect_collapse",
]

MODES = ("tv-diff", "mean-split", "max-jump")
TIE_BREAKS = ("largest", "smallest")
DEFAULT_MODE = "mean-split"


def sensitivity_score(g: np.ndarray) -> float:
    """RMS over images of the squared L2 norm of each image's gradient."""
    g = np.asarray(g, dtype=np.float64)
    if g.ndim < 1 or g.shape[0] < 1:
        raise ValidationError("sensitivity_score requires a nonempty batch")
    check_finite(g, "gradient batch")
    per_image = np.square(g.reshape(g.shape[0], -1)).sum(axis=1)
    return float(np.sqrt(per_image.mean()))


def normalize_scores(scores: Sequence[float]) -> np.ndarray:
    """Min-max normalize; a flat curve maps to all zeros and warns."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.size < 2:
        raise ValidationError("normalize_scores needs at least 2 scores")
    check_finite(s, "scores")
    lo, hi = s.min(), s.max()
    if hi == lo:
        _warnings.warn("all sensitivity scores are equal; normalized curve is all zeros",
                       DegenerateCurveWarning, stacklevel=2)
        return np.zeros_like(s)
    return (s - lo) / (hi - lo)


def local_variations(normalized: Sequence[float]) -> np.ndarray:
    """Absolute consecutive differences d[i] = |s[i+1] - s[i]|, i = 0..N-2."""
    s = np.asarray(normalized, dtype=np.float64)
    if s.ndim != 1 or s.size < 3:
        raise ValidationError("local_variations needs at least 3 scores "
                              "(no nondegenerate split exists below that)")
    return np.abs(np.diff(s))


@dataclass(frozen=True)
class SensitivityCurve:
    """Raw scores, normalized scores and variations, in cap-index order."""

    raw: np.ndarray
    normalized: np.ndarray
    variations: np.ndarray
    warnings: tuple[str, ...] = ()

    @classmethod
    def from_raw(cls, scores: Sequence[float]) -> "SensitivityCurve":
        raw = np.asarray(scores, dtype=np.float64)
        with _warnings.catch_warnings(record=True) as caught:
            _warnings.simplefilter("always")
            normalized = normalize_scores(raw)
        notes = tuple(str(w.message) for w in caught
                      if issubclass(w.category, DegenerateCurveWarning))
        return cls(raw=raw, normalized=normalized,
                   variations=local_variations(normalized), warnings=notes)

    def __len__(self) -> int:
        return int(self.raw.size)

    @property
    def is_degenerate(self) -> bool:
        return bool(self.raw.max() == self.raw.min())


def split_objective(d: Sequence[float], k: int, mode: str = DEFAULT_MODE) -> float:
    """Objective value of placing the boundary at candidate ``k``."""
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}; expected one of {MODES}")
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 1 or d.size < 2:
        raise ValidationError("split_objective needs at least 2 variations")
    k = int(k)
    if not 1 <= k <= d.size - 1:
        raise ValidationError(
            f"candidate k={k} outside 1..{d.size - 1} (both regions must be nonempty)"
        )
    left, right = d[:k], d[k:]
    if mode == "tv-diff":
        return float(np.sum(right) - np.sum(left))
    if mode == "mean-split":
        return float(np.mean(right) - np.mean(left))
    return float(d[k])


@dataclass(frozen=True)
class SelectionReport:
    """Outcome of collapse detection, plus run provenance when available."""

    mode: str
    tie_break: str
    candidates: tuple[int, ...]
    objectives: tuple[float, ...]
    k_star: int
    selected: NetConfig | None = None
    family: tuple[NetConfig, ...] | None = None
    seed: int | None = None
    num_samples: int | None = None
    warnings: tuple[str, ...] = ()


def detect_collapse(curve: SensitivityCurve, mode: str = DEFAULT_MODE,
                    tie_break: str = "largest",
                    configs: Sequence[NetConfig] | None = None,
                    candidates: Sequence[int] | None = None) -> SelectionReport:
    """Pick the boundary index k* maximizing the split objective.

    ``candidates`` defaults to 1..N-2 (every split with both regions
    nonempty); a custom subset of that range may be passed. The curve member
    at k* is the last configuration on the stable (wide) side and is reported
    as selected when ``configs`` is given. A flat curve yields objective 0
    everywhere and resolves purely by tie-break, with an explicit warning.
    """
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}; expected one of {MODES}")
    if tie_break not in TIE_BREAKS:
        raise ValidationError(f"unknown tie_break {tie_break!r}; expected one of {TIE_BREAKS}")
    n = len(curve)
    if candidates is None:
        candidates = tuple(range(1, n - 1))
    else:
        candidates = tuple(sorted({int(k) for k in candidates}))
    if not candidates:
        raise ValidationError(f"no split candidates exist for a curve of {n} scores")
    if configs is not None and len(configs) != n:
        raise ValidationError(f"{len(configs)} configs for a curve of {n} scores")

    objectives = tuple(split_objective(curve.variations, k, mode) for k in candidates)
    best_k, best_val = candidates[0], objectives[0]
    for k, val in zip(candidates[1:], objectives[1:]):
        if (val >= best_val) if tie_break == "largest" else (val > best_val):
            best_k, best_val = k, val

    notes = list(curve.warnings)
    if curve.is_degenerate:
        notes.append(
            "degenerate selection: flat sensitivity curve, boundary chosen by tie-break only"
        )
    return SelectionReport(
        mode=mode,
        tie_break=tie_break,
        candidates=candidates,
        objectives=objectives,
        k_star=best_k,
        selected=None if configs is None else configs[best_k],
        family=None if configs is None else tuple(configs),
        warnings=tuple(notes),
    )


def with_provenance(report: SelectionReport, seed: int, num_samples: int,
                    extra_warnings: Sequence[str] = ()) -> SelectionReport:
    """Attach run provenance to a detection report."""
    return replace(report, seed=int(seed), num_samples=int(num_samples),
                   warnings=report.warnings + tuple(extra_warnings))
