"""Independent verification machinery.

Everything here deliberately avoids the code paths it checks: the finite
difference probe uses only forward passes, the exhaustive split search uses
plain Python summation, and the synthetic curves provide known boundaries
for detector regression tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .network import NetworkInstance, Tape, forward
from .sensitivity import MODES, TIE_BREAKS

__all__ = [
    "finite_diff_gradient",
    "sample_safe_positions",
    "brute_force_split",
    "SyntheticCurveSpec",
    "generate_curve",
    "linear_tape",
]

KINK_THRESHOLD = 1e-6  # |pre-activation| below this counts as kink-adjacent


def _probe(net, x: np.ndarray):
    """Summed logits, smallest |pre-activation| and branch masks of one pass.

    ``net`` is either a NetworkInstance or any callable mapping an input
    batch to ``(logits, Tape)``; the latter lets hand-built micro-networks
    go through the same probing machinery.
    """
    if isinstance(net, NetworkInstance):
        logits, tape = forward(net, x)
    else:
        logits, tape = net(x)
    return float(logits.sum()), tape.min_preact, tape.act_masks


def _same_branches(a: list[np.ndarray], b: list[np.ndarray]) -> bool:
    return all(np.array_equal(ma, mb) for ma, mb in zip(a, b))


def linear_tape() -> Tape:
    """Placeholder tape for activation-free callables fed to the probes."""
    return Tape(entries=[], input_id=0, output_id=0,
                min_preact=float("inf"), act_masks=[])


def _central_difference(net, x: np.ndarray,
                        pos: tuple[int, ...], step: float) -> float:
    xp = x.copy()
    xp[pos] += step
    f_plus, _, _ = _probe(net, xp)
    xp[pos] -= 2.0 * step
    f_minus, _, _ = _probe(net, xp)
    return (f_plus - f_minus) / (2.0 * step)


def finite_diff_gradient(net, x: np.ndarray,
                         positions, step: float = 1e-4) -> list[tuple[tuple[int, ...], float]]:
    """Central differences of the summed logits at the given input positions.

    Forward passes only; float64 throughout. The summed-logits scalar is
    piecewise linear in the input except through the normalization layers, so
    the step mainly balances roundoff against those smooth terms. ``net`` may
    be a NetworkInstance or a callable returning (logits, Tape).
    """
    if step <= 0:
        raise ValidationError(f"step must be positive, got {step}")
    x = np.asarray(x, dtype=np.float64)
    out = []
    for pos in positions:
        pos = tuple(int(p) for p in pos)
        out.append((pos, _central_difference(net, x, pos, step)))
    return out


def sample_safe_positions(net, x: np.ndarray, count: int,
                          step: float = 1e-4, seed: int = 0,
                          threshold: float = KINK_THRESHOLD,
                          max_tries: int | None = None):
    """Sample input positions whose finite-difference probes stay away from
    leaky-ReLU kinks.

    A position is kept only if (a) every forward pass involved (base and both
    perturbed) keeps all pre-activation magnitudes above ``threshold`` and
    (b) no activation switches branch between the base and perturbed passes.
    The magnitude floor alone is not enough: a pre-activation can cross zero
    inside the probe interval with both endpoints above the floor, and a
    difference straddling a kink says nothing about gradient correctness.
    Returns (positions, fd_derivatives) for ``count`` accepted positions.
    """
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(seed)
    _, base_min, base_masks = _probe(net, x)
    positions: list[tuple[int, ...]] = []
    derivs: list[float] = []
    seen: set[tuple[int, ...]] = set()
    tries = 0
    budget = max_tries if max_tries is not None else 50 * count
    while len(positions) < count:
        if tries >= budget:
            raise ValidationError(
                f"could not find {count} kink-safe positions in {budget} tries; "
                f"base min |pre-activation| = {base_min:.2e}"
            )
        tries += 1
        pos = tuple(int(rng.integers(0, s)) for s in x.shape)
        if pos in seen:
            continue
        seen.add(pos)
        xp = x.copy()
        xp[pos] += step
        f_plus, m_plus, masks_plus = _probe(net, xp)
        xp[pos] -= 2.0 * step
        f_minus, m_minus, masks_minus = _probe(net, xp)
        if min(base_min, m_plus, m_minus) < threshold:
            continue
        if not (_same_branches(base_masks, masks_plus)
                and _same_branches(base_masks, masks_minus)):
            continue
        positions.append(pos)
        derivs.append((f_plus - f_minus) / (2.0 * step))
    return positions, derivs


def brute_force_split(d, mode: str, tie_break: str = "largest") -> int:
    """Exhaustive reference for the split search: evaluates every candidate
    by direct summation and applies the tie-break. Test-side ground truth."""
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}")
    if tie_break not in TIE_BREAKS:
        raise ValidationError(f"unknown tie_break {tie_break!r}")
    values = [float(v) for v in d]
    m = len(values)
    if m < 2:
        raise ValidationError("need at least 2 variations")

    def objective(k: int) -> float:
        left = values[:k]
        right = values[k:]
        if mode == "tv-diff":
            return sum(right) - sum(left)
        if mode == "mean-split":
            return sum(right) / len(right) - sum(left) / len(left)
        return values[k]

    scored = [(k, objective(k)) for k in range(1, m)]
    best = max(v for _, v in scored)
    tied = [k for k, v in scored if v == best]
    return max(tied) if tie_break == "largest" else min(tied)


@dataclass(frozen=True)
class SyntheticCurveSpec:
    """Two-regime test curve: a near-flat plateau, one sharp jump, then a
    growing tail, with optional seeded noise. The jump lands at index
    ``plateau_len`` (counting from the widest model at index 0)."""

    plateau_len: int
    tail_len: int
    plateau_slope: float = 0.0
    jump: float = 1.0
    growth: float = 0.0
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.plateau_len < 1 or self.tail_len < 1:
            raise ValidationError("plateau_len and tail_len must be >= 1")
        if self.noise < 0:
            raise ValidationError("noise amplitude must be >= 0")

    @property
    def jump_position(self) -> int:
        return self.plateau_len

    @property
    def length(self) -> int:
        return self.plateau_len + self.tail_len


def generate_curve(spec: SyntheticCurveSpec) -> np.ndarray:
    """Deterministic synthetic raw-score curve, widest model first."""
    p, t = spec.plateau_len, spec.tail_len
    curve = np.empty(p + t, dtype=np.float64)
    curve[:p] = spec.plateau_slope * np.arange(p)
    tail_base = curve[p - 1] + spec.jump
    curve[p:] = tail_base + spec.growth * np.arange(t)
    if spec.noise > 0:
        rng = np.random.default_rng(spec.seed)
        curve = curve + rng.normal(0.0, spec.noise, size=curve.size)
    return curve
