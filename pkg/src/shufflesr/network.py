"""U-net style super-resolution networks.

Two variants share one skeleton:

* ``build_unet_sr``    -- one-way skips: each expanding block concatenates
  only the same-depth contracting feature.
* ``build_dense_unet`` -- dense skips: every expanding block concatenates
  the contracting features from all depths, bilinearly resized to the
  block's resolution.

The skeleton: the low-resolution input is bicubic pre-upsampled to the
target size and passed through a 3x3 conv + ReLU stem; each contracting
block is one 3x3 conv + ReLU followed by the configured pooling; each
expanding block is a nearest 2x upsample, a 2x2 conv that halves the
feature maps (trailing-edge zero pad keeps the spatial size), the skip
concatenation, and a 3x3 conv + ReLU; a 3x3 head maps to 3 channels, and
with ``residual_output`` the bicubic pre-upsampled image is added back.

Channel widths start at ``base_channels`` and double per contracting depth.
Shuffle pooling multiplies channels by factor^2 on top of that; the widened
maps feed the next convolution directly, which is what inflates the
parameter count of the shuffle variants.

Weights are He-uniform (fan-in) from a seeded generator, biases zero, so a
(seed, config) pair always builds the identical model.  Parameters are
read-shared during inference; training steps are single-writer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .ops import concat_channels, conv2d, pad2d, relu, resize
from .pooling import PoolSpec, apply_pool

SKIP_STYLES = ("one_way", "dense")


@dataclass(frozen=True)
class NetworkConfig:
    depth: int = 3
    base_channels: int = 64
    scale: int = 2
    pooling: PoolSpec = field(default_factory=lambda: PoolSpec("max", 2))
    skips: str = "dense"
    residual_output: bool = True

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")
        if self.base_channels < 1:
            raise ValueError(f"base_channels must be >= 1, got {self.base_channels}")
        if self.scale not in (2, 4, 8):
            raise ValueError(f"scale must be one of 2, 4, 8, got {self.scale}")
        if self.skips not in SKIP_STYLES:
            raise ValueError(f"skips must be one of {SKIP_STYLES}, got {self.skips!r}")
        if self.pooling.factor != 2:
            raise ValueError("network pooling uses factor 2 (one halving per depth)")


@dataclass(frozen=True)
class ConvSpec:
    name: str
    c_in: int
    c_out: int
    kh: int
    kw: int

    @property
    def n_params(self):
        return self.c_in * self.c_out * self.kh * self.kw + self.c_out


@dataclass
class ChannelLedger:
    """Every convolution plus the channel bookkeeping around the poolings."""

    convs: list
    encoder_channels: list  # 3x3 conv outputs per contracting depth
    pooled_channels: list  # channels right after each pooling step
    concat_fanin: dict  # expanding depth -> channels entering the 3x3 conv
    skip_channels: dict  # expanding depth -> skip contribution within that fan-in

    def param_count(self):
        return sum(cs.n_params for cs in self.convs)

    def text(self):
        lines = [f"{'layer':<14}{'in':>6}{'out':>6}  kernel  params"]
        for cs in self.convs:
            lines.append(
                f"{cs.name:<14}{cs.c_in:>6}{cs.c_out:>6}  {cs.kh}x{cs.kw}     {cs.n_params}"
            )
        lines.append(f"total params: {self.param_count()}")
        return "\n".join(lines)


def channel_ledger(cfg):
    """Pure shape arithmetic for a config; the builder materializes from it."""
    base = cfg.base_channels
    mult = cfg.pooling.channel_multiplier
    convs = [ConvSpec("stem", 3, base, 3, 3)]
    encoder = []
    pooled = []
    ch = base
    for i in range(1, cfg.depth + 1):
        out = base * 2 ** (i - 1)
        convs.append(ConvSpec(f"down{i}.conv", ch, out, 3, 3))
        encoder.append(out)
        ch = out * mult
        pooled.append(ch)

    concat_fanin = {}
    skip_channels = {}
    for i in range(cfg.depth, 0, -1):
        half = max(1, ch // 2)
        convs.append(ConvSpec(f"up{i}.halve", ch, half, 2, 2))
        skip = encoder[i - 1] if cfg.skips == "one_way" else sum(encoder)
        skip_channels[i] = skip
        concat_fanin[i] = half + skip
        out = encoder[i - 1]
        convs.append(ConvSpec(f"up{i}.conv", half + skip, out, 3, 3))
        ch = out

    convs.append(ConvSpec("head", ch, 3, 3, 3))
    return ChannelLedger(
        convs=convs,
        encoder_channels=encoder,
        pooled_channels=pooled,
        concat_fanin=concat_fanin,
        skip_channels=skip_channels,
    )


@dataclass
class Model:
    config: NetworkConfig
    params: dict  # name -> Tensor, insertion-ordered


def _build(cfg, seed, dtype):
    rng = np.random.default_rng(seed)
    params = {}
    for cs in channel_ledger(cfg).convs:
        fan_in = cs.c_in * cs.kh * cs.kw
        bound = math.sqrt(6.0 / fan_in)
        w = rng.uniform(-bound, bound, size=(cs.c_out, cs.c_in, cs.kh, cs.kw))
        params[f"{cs.name}.w"] = Tensor(w.astype(dtype), requires_grad=True)
        params[f"{cs.name}.b"] = Tensor(np.zeros(cs.c_out, dtype=dtype), requires_grad=True)
    return Model(config=cfg, params=params)


def build_dense_unet(cfg, seed=0, dtype=np.float64):
    """Dense-skip variant; requires cfg.skips == 'dense'."""
    if cfg.skips != "dense":
        raise ValueError("build_dense_unet needs skips='dense'")
    return _build(cfg, seed, dtype)


def build_unet_sr(cfg, seed=0, dtype=np.float64):
    """One-way-skip baseline; requires cfg.skips == 'one_way'."""
    if cfg.skips != "one_way":
        raise ValueError("build_unet_sr needs skips='one_way'")
    return _build(cfg, seed, dtype)


def build_model(cfg, seed=0, dtype=np.float64):
    """Dispatch on cfg.skips."""
    return build_dense_unet(cfg, seed, dtype) if cfg.skips == "dense" else build_unet_sr(cfg, seed, dtype)


def forward(model, lr_image):
    """Super-resolve an NCHW [0,1] image batch; output is HR-sized, 3 channels.

    Deterministic for a fixed (model, input); differentiable end to end with
    respect to the parameters.  The output is unclamped -- clamp to [0,1]
    only at the evaluation/PNG boundary.
    """
    cfg = model.config
    x = lr_image if isinstance(lr_image, Tensor) else Tensor(lr_image)
    if x.ndim != 4 or x.shape[1] != 3:
        raise ValueError(f"forward expects (n, 3, h, w) input, got {x.shape}")
    n, _, h, w = x.shape
    hr_h, hr_w = h * cfg.scale, w * cfg.scale
    div = 2**cfg.depth
    if hr_h % div or hr_w % div:
        raise ValueError(
            f"pre-upsampled size {hr_h}x{hr_w} not divisible by 2^depth ({div})"
        )

    params = model.params
    used = set()

    def conv_named(t, name, padding):
        used.add(f"{name}.w")
        used.add(f"{name}.b")
        return conv2d(t, params[f"{name}.w"], params[f"{name}.b"], 1, padding)

    up = resize(x, hr_h, hr_w, "bicubic")
    feat = relu(conv_named(up, "stem", 1))

    skips = []
    for i in range(1, cfg.depth + 1):
        g = relu(conv_named(feat, f"down{i}.conv", 1))
        skips.append(g)
        feat = apply_pool(g, cfg.pooling)

    for i in range(cfg.depth, 0, -1):
        th, tw = hr_h >> (i - 1), hr_w >> (i - 1)
        feat = resize(feat, th, tw, "nearest")
        feat = conv_named(pad2d(feat, 0, 1, 0, 1), f"up{i}.halve", 0)
        selected = [skips[i - 1]] if cfg.skips == "one_way" else skips
        pieces = [feat]
        for s in selected:
            if s.shape[2] != th or s.shape[3] != tw:
                s = resize(s, th, tw, "bilinear")
            pieces.append(s)
        feat = relu(conv_named(concat_channels(pieces), f"up{i}.conv", 1))

    out = conv_named(feat, "head", 1)
    if used != set(params):
        raise RuntimeError(
            f"forward did not touch the declared parameter set: missing {set(params) - used}"
        )
    if cfg.residual_output:
        out = out + up
    return out


def param_count(model):
    """Total scalar parameters in the model."""
    return int(sum(p.data.size for p in model.params.values()))


def param_count_for_config(cfg):
    """Parameter count from shape arithmetic alone (no allocation)."""
    return channel_ledger(cfg).param_count()
