"""Width-capped U-Net configuration family.

The family is generated from one base configuration by halving a channel cap:
member ``i`` uses cap ``max_channels / 2**i`` and stage widths
``min(2**l * base_channels, cap)``. Depth, downsampling schedule and output
resolution are identical for every member; only widths shrink.

The block template is fixed: every stage runs two (conv3x3 -> instance norm ->
leaky-ReLU 0.01) blocks, stages after the first downsample with stride 2 in
their first conv, the deepest stage acts as the bottleneck, each decoder level
upsamples with a 2x2/stride-2 transposed conv, concatenates the encoder skip,
and runs two more conv blocks; a final 1x1 conv maps to the output classes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigurationError

__all__ = [
    "CONV_KERNEL",
    "CONV_PAD",
    "UP_FACTOR",
    "LEAKY_SLOPE",
    "NORM_EPS",
    "FamilyConfig",
    "NetConfig",
    "default_stage_count",
    "channel_schedule",
    "param_count",
    "build_family",
    "network_plan",
]

CONV_KERNEL = 3
CONV_PAD = 1
UP_FACTOR = 2
LEAKY_SLOPE = 0.01
NORM_EPS = 1e-5


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def default_stage_count(input_size: tuple[int, int]) -> int:
    """Deepest stage count that keeps spatial sizes divisible: at most 6,
    at most log2(min side) - 2, reduced until 2**(L-1) divides both sides."""
    h, w = input_size
    stages = min(6, min(h, w).bit_length() - 1 - 2)
    stages = max(1, stages)
    while stages > 1 and (h % (1 << (stages - 1)) or w % (1 << (stages - 1))):
        stages -= 1
    return stages


@dataclass(frozen=True)
class FamilyConfig:
    """Base U-Net hyperparameters shared by every family member."""

    input_size: tuple[int, int]
    base_channels: int = 32
    max_channels: int = 512
    stages: int | None = None
    in_channels: int = 1
    out_classes: int = 2

    def __post_init__(self):
        h, w = self.input_size
        if h <= 0 or w <= 0:
            raise ConfigurationError(f"input size must be positive, got {self.input_size}")
        if self.base_channels <= 0:
            raise ConfigurationError(f"base_channels must be positive, got {self.base_channels}")
        if not _is_power_of_two(self.max_channels):
            raise ConfigurationError(
                f"max_channels must be a power of two, got {self.max_channels}"
            )
        if self.in_channels <= 0 or self.out_classes <= 0:
            raise ConfigurationError("in_channels and out_classes must be positive")
        if self.stages is None:
            object.__setattr__(self, "stages", default_stage_count(self.input_size))
        if self.stages < 1:
            raise ConfigurationError(f"stages must be >= 1, got {self.stages}")
        down = 1 << (self.stages - 1)
        if h % down or w % down:
            raise ConfigurationError(
                f"input size {self.input_size} not divisible by 2**(stages-1) = {down}"
            )

    @property
    def family_size(self) -> int:
        """Number of family members: log2(max_channels) + 1."""
        return self.max_channels.bit_length()


@dataclass(frozen=True)
class NetConfig:
    """One width-capped family member."""

    cap_index: int
    cap: int
    channels: tuple[int, ...]
    param_count: int


def channel_schedule(fc: FamilyConfig, cap_index: int) -> tuple[int, ...]:
    """Per-stage encoder widths for member ``cap_index``."""
    if not 0 <= cap_index < fc.family_size:
        raise ConfigurationError(
            f"cap_index {cap_index} outside 0..{fc.family_size - 1}"
        )
    cap = fc.max_channels >> cap_index
    return tuple(min((1 << l) * fc.base_channels, cap) for l in range(fc.stages))


# ---------------------------------------------------------------------------
# Structural plan: the single source of truth for parameter counting and
# weight materialization.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvBlockPlan:
    name: str
    cin: int
    cout: int
    stride: int = 1


@dataclass(frozen=True)
class UpPlan:
    name: str
    cin: int
    cout: int
    factor: int = UP_FACTOR


@dataclass(frozen=True)
class DecoderStagePlan:
    up: UpPlan
    blocks: tuple[ConvBlockPlan, ConvBlockPlan]


@dataclass(frozen=True)
class NetworkPlan:
    encoder: tuple[tuple[ConvBlockPlan, ConvBlockPlan], ...]
    decoder: tuple[DecoderStagePlan, ...] = field(default=())
    head_cin: int = 0
    head_cout: int = 0


def network_plan(channels: tuple[int, ...], fc: FamilyConfig) -> NetworkPlan:
    """Expand a stage-width schedule into the fixed block template."""
    encoder = []
    prev = fc.in_channels
    for l, width in enumerate(channels):
        stride = 1 if l == 0 else 2
        encoder.append((
            ConvBlockPlan(f"enc{l}.conv1", prev, width, stride),
            ConvBlockPlan(f"enc{l}.conv2", width, width, 1),
        ))
        prev = width
    decoder = []
    for l in range(len(channels) - 2, -1, -1):
        width = channels[l]
        decoder.append(DecoderStagePlan(
            up=UpPlan(f"dec{l}.up", channels[l + 1], width),
            blocks=(
                ConvBlockPlan(f"dec{l}.conv1", 2 * width, width, 1),
                ConvBlockPlan(f"dec{l}.conv2", width, width, 1),
            ),
        ))
    return NetworkPlan(
        encoder=tuple(encoder),
        decoder=tuple(decoder),
        head_cin=channels[0],
        head_cout=fc.out_classes,
    )


def _block_params(blk: ConvBlockPlan) -> int:
    conv = blk.cout * blk.cin * CONV_KERNEL * CONV_KERNEL + blk.cout
    norm = 2 * blk.cout
    return conv + norm


def _plan_params(plan: NetworkPlan) -> int:
    total = 0
    for stage in plan.encoder:
        total += sum(_block_params(b) for b in stage)
    for dec in plan.decoder:
        total += dec.up.cin * dec.up.cout * dec.up.factor * dec.up.factor + dec.up.cout
        total += sum(_block_params(b) for b in dec.blocks)
    total += plan.head_cout * plan.head_cin + plan.head_cout
    return total


def param_count(cfg: NetConfig, fc: FamilyConfig) -> int:
    """Exact scalar parameter count (conv weights and biases plus norm affine)."""
    expected = channel_schedule(fc, cfg.cap_index)
    if tuple(cfg.channels) != expected:
        raise ConfigurationError(
            f"config channels {cfg.channels} do not match schedule {expected}"
        )
    return _plan_params(network_plan(tuple(cfg.channels), fc))


def build_family(fc: FamilyConfig) -> tuple[NetConfig, ...]:
    """All family members, ordered largest capacity (cap_index 0) to smallest.

    Parameter counts strictly decrease along the order whenever the cap binds
    at every step, i.e. when max_channels <= 2**(stages-1) * base_channels;
    with a looser cap the widest members coincide.
    """
    members = []
    for i in range(fc.family_size):
        channels = channel_schedule(fc, i)
        params = _plan_params(network_plan(channels, fc))
        members.append(NetConfig(cap_index=i, cap=fc.max_channels >> i,
                                 channels=channels, param_count=params))
    return tuple(members)
