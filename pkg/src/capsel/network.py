"""Seeded untrained networks: weight materialization, forward pass with a
pullback tape, and the input gradient of the summed logits.

Weight initialization: conv and transposed-conv weights are zero-mean normal
with std sqrt(2 / ((1 + slope^2) * fan_in)) (He, corrected for the leaky-ReLU
slope), fan_in = in_channels * kernel_h * kernel_w; biases start at zero,
norm gamma at one, beta at zero. Draws come from ``numpy.random.default_rng``
seeded with the given seed, consumed in layer order (encoder stages first,
then decoder levels deepest-first, then the head), so a fixed (config, seed)
pair reproduces bit-identical weights within this implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ops
from .errors import NumericalError, ValidationError
from .family import (
    CONV_KERNEL,
    CONV_PAD,
    LEAKY_SLOPE,
    NORM_EPS,
    ConvBlockPlan,
    FamilyConfig,
    NetConfig,
    NetworkPlan,
    network_plan,
)
from .tensor import check_finite

__all__ = ["NetworkInstance", "Tape", "TapeEntry", "init_network", "forward", "input_gradient"]


@dataclass(frozen=True)
class ConvBlockWeights:
    plan: ConvBlockPlan
    spec: ops.ConvSpec
    w: np.ndarray
    b: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray


@dataclass(frozen=True)
class DecoderStageWeights:
    level: int  # encoder stage whose resolution and skip this level restores
    up_w: np.ndarray
    up_b: np.ndarray
    blocks: tuple[ConvBlockWeights, ConvBlockWeights]


@dataclass(frozen=True)
class NetworkInstance:
    """A fully materialized untrained family member. Immutable."""

    config: NetConfig
    family: FamilyConfig
    seed: int
    encoder: tuple[tuple[ConvBlockWeights, ConvBlockWeights], ...]
    decoder: tuple[DecoderStageWeights, ...]
    head_w: np.ndarray
    head_b: np.ndarray

    def parameter_total(self) -> int:
        """Scalar parameters actually held; must equal config.param_count."""
        total = 0
        for stage in self.encoder:
            for blk in stage:
                total += blk.w.size + blk.b.size + blk.gamma.size + blk.beta.size
        for dec in self.decoder:
            total += dec.up_w.size + dec.up_b.size
            for blk in dec.blocks:
                total += blk.w.size + blk.b.size + blk.gamma.size + blk.beta.size
        return total + self.head_w.size + self.head_b.size


@dataclass(frozen=True)
class TapeEntry:
    name: str
    pullback: ops.Pullback
    in_ids: tuple[int, ...]
    out_id: int


@dataclass
class Tape:
    """Wengert list of one forward pass plus bookkeeping for the sweep."""

    entries: list[TapeEntry]
    input_id: int
    output_id: int
    min_preact: float  # smallest |pre-activation| fed to any leaky-ReLU
    act_masks: list[np.ndarray]  # positive-branch mask of each activation


def _he_normal(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    std = math.sqrt(2.0 / ((1.0 + LEAKY_SLOPE ** 2) * fan_in))
    return rng.normal(0.0, std, size=shape)


def _init_block(rng: np.random.Generator, plan: ConvBlockPlan) -> ConvBlockWeights:
    spec = ops.ConvSpec(plan.cin, plan.cout, (CONV_KERNEL, CONV_KERNEL),
                        (plan.stride, plan.stride), (CONV_PAD, CONV_PAD))
    w = _he_normal(rng, (plan.cout, plan.cin, CONV_KERNEL, CONV_KERNEL),
                   plan.cin * CONV_KERNEL * CONV_KERNEL)
    return ConvBlockWeights(
        plan=plan,
        spec=spec,
        w=w,
        b=np.zeros(plan.cout),
        gamma=np.ones(plan.cout),
        beta=np.zeros(plan.cout),
    )


def init_network(cfg: NetConfig, fc: FamilyConfig, seed: int) -> NetworkInstance:
    """Materialize one seeded family member at initialization."""
    plan: NetworkPlan = network_plan(tuple(cfg.channels), fc)
    rng = np.random.default_rng(int(seed))
    encoder = tuple(
        (_init_block(rng, stage[0]), _init_block(rng, stage[1]))
        for stage in plan.encoder
    )
    decoder = []
    for level, dec in zip(range(fc.stages - 2, -1, -1), plan.decoder):
        f = dec.up.factor
        up_w = _he_normal(rng, (dec.up.cin, dec.up.cout, f, f), dec.up.cin * f * f)
        decoder.append(DecoderStageWeights(
            level=level,
            up_w=up_w,
            up_b=np.zeros(dec.up.cout),
            blocks=(_init_block(rng, dec.blocks[0]), _init_block(rng, dec.blocks[1])),
        ))
    head_w = _he_normal(rng, (plan.head_cout, plan.head_cin, 1, 1), plan.head_cin)
    return NetworkInstance(
        config=cfg,
        family=fc,
        seed=int(seed),
        encoder=encoder,
        decoder=tuple(decoder),
        head_w=head_w,
        head_b=np.zeros(plan.head_cout),
    )


class _Recorder:
    """Assigns value ids and collects tape entries during a forward pass."""

    def __init__(self):
        self.entries: list[TapeEntry] = []
        self._next = 0
        self.min_preact = math.inf
        self.act_masks: list[np.ndarray] = []

    def new_id(self) -> int:
        vid = self._next
        self._next += 1
        return vid

    def emit(self, name: str, result, pullback: ops.Pullback,
             in_ids: tuple[int, ...]) -> tuple[np.ndarray, int]:
        if not np.isfinite(result).all():
            raise NumericalError(f"non-finite activation leaving {name}", layer=name)
        out_id = self.new_id()
        self.entries.append(TapeEntry(name, pullback, in_ids, out_id))
        return result, out_id


def _run_block(rec: _Recorder, blk: ConvBlockWeights, h: np.ndarray, hid: int):
    name = blk.plan.name
    y, pb = ops.conv2d(h, blk.w, blk.b, blk.spec)
    y, yid = rec.emit(name, y, pb, (hid,))
    z, pb = ops.instance_norm(y, blk.gamma, blk.beta, NORM_EPS)
    z, zid = rec.emit(name + ".norm", z, pb, (yid,))
    rec.min_preact = min(rec.min_preact, float(np.abs(z).min()))
    rec.act_masks.append(z > 0)
    a, pb = ops.leaky_relu(z, LEAKY_SLOPE)
    a, aid = rec.emit(name + ".act", a, pb, (zid,))
    return a, aid


def forward(net: NetworkInstance, x: np.ndarray) -> tuple[np.ndarray, Tape]:
    """Run the network; returns (logits[K,N,H,W], tape).

    The tape records every primitive's pullback and wiring, so the input
    gradient can be obtained by one reverse sweep without re-running forward.
    """
    fc = net.family
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if x.ndim != 4:
        raise ValidationError(f"forward expects a K,C,H,W batch, got shape {x.shape}")
    k_n, c, h, w = x.shape
    if c != fc.in_channels or (h, w) != tuple(fc.input_size):
        raise ValidationError(
            f"batch shape {x.shape[1:]} does not match configured "
            f"({fc.in_channels}, {fc.input_size[0]}, {fc.input_size[1]})"
        )
    check_finite(x, "forward input")

    rec = _Recorder()
    input_id = rec.new_id()

    feat, fid = x, input_id
    skips: list[tuple[np.ndarray, int]] = []
    for stage in net.encoder:
        for blk in stage:
            feat, fid = _run_block(rec, blk, feat, fid)
        skips.append((feat, fid))

    for dec in net.decoder:
        up, pb = ops.transposed_conv2d(feat, dec.up_w, dec.up_b,
                                       (dec.up_w.shape[2], dec.up_w.shape[3]))
        up, uid = rec.emit(f"dec{dec.level}.up", up, pb, (fid,))
        skip_feat, skip_id = skips[dec.level]
        feat, pb = ops.concat_channels(skip_feat, up)
        feat, fid = rec.emit(f"dec{dec.level}.concat", feat, pb, (skip_id, uid))
        for blk in dec.blocks:
            feat, fid = _run_block(rec, blk, feat, fid)

    head_spec = ops.ConvSpec(net.head_w.shape[1], net.head_w.shape[0], (1, 1))
    logits, pb = ops.conv2d(feat, net.head_w, net.head_b, head_spec)
    logits, out_id = rec.emit("head", logits, pb, (fid,))

    tape = Tape(entries=rec.entries, input_id=input_id, output_id=out_id,
                min_preact=rec.min_preact, act_masks=rec.act_masks)
    return logits, tape


def _sweep(tape: Tape, seed_cotangent: np.ndarray) -> np.ndarray:
    cot: dict[int, np.ndarray] = {tape.output_id: seed_cotangent}
    for entry in reversed(tape.entries):
        g = cot.pop(entry.out_id, None)
        if g is None:
            continue
        outs = entry.pullback(g)
        if not isinstance(outs, tuple):
            outs = (outs,)
        for vid, gi in zip(entry.in_ids, outs):
            if not np.isfinite(gi).all():
                raise NumericalError(
                    f"non-finite cotangent leaving pullback of {entry.name}",
                    layer=entry.name,
                )
            if vid in cot:
                cot[vid] = cot[vid] + gi
            else:
                cot[vid] = gi
    return cot[tape.input_id]


def input_gradient(net: NetworkInstance, x: np.ndarray) -> np.ndarray:
    """Gradient of the summed logits with respect to the input batch.

    Equals grad_x of sum over all output locations and class channels, taken
    in one reverse sweep with an all-ones cotangent; each batch member's slice
    depends only on that member's input.
    """
    logits, tape = forward(net, x)
    return _sweep(tape, np.ones_like(logits))
