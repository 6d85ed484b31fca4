"""Shuffle pooling: lossless space-to-depth down-sampling, plus baselines.

Shuffle pooling samples a feature map at a fixed spatial interval and
rearranges the samples into extra channels.  With sample offsets
``(a, b) in [0, factor)^2`` and offset index ``o = a*factor + b``, the two
arrangements place input entry ``x[ch, factor*i + a, factor*j + b]`` at

* ``direct``:  output channel ``o*c + ch``  (offset-major grouping)
* ``insert``:  output channel ``ch*factor**2 + o``  (channel-major interleave)

Both are pure index permutations: they are exactly invertible, and the
gradient of the pooling is the inverse permutation.  Max and average pooling
are provided as the lossy baselines the analyzer compares against.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .autodiff import Tensor, _needs_grad
from .ops import avg_pool, max_pool

POOL_KINDS = ("max", "avg", "shuffle_direct", "shuffle_insert")
ARRANGEMENTS = ("direct", "insert")


@dataclass(frozen=True)
class PoolSpec:
    """Down-sampling choice: kind plus spatial factor per step."""

    kind: str
    factor: int = 2

    def __post_init__(self):
        if self.kind not in POOL_KINDS:
            raise ValueError(f"unknown pooling kind {self.kind!r}; choose from {POOL_KINDS}")
        if self.factor < 2:
            raise ValueError(f"pooling factor must be >= 2, got {self.factor}")

    @property
    def channel_multiplier(self):
        """Channels out / channels in: factor^2 for shuffle kinds, else 1."""
        return self.factor**2 if self.kind.startswith("shuffle") else 1


def _check_divisible(h, w, factor):
    if h % factor or w % factor:
        raise ValueError(f"spatial dims {h}x{w} not divisible by factor {factor}")


def _shuffle_pool_array(a, arrangement, factor):
    n, c, h, w = a.shape
    f = factor
    _check_divisible(h, w, f)
    v = a.reshape(n, c, h // f, f, w // f, f)  # axes: n, ch, i, a, j, b
    if arrangement == "direct":
        out = v.transpose(0, 3, 5, 1, 2, 4)  # (n, a, b, ch, i, j)
    elif arrangement == "insert":
        out = v.transpose(0, 1, 3, 5, 2, 4)  # (n, ch, a, b, i, j)
    else:
        raise ValueError(f"unknown arrangement {arrangement!r}; choose from {ARRANGEMENTS}")
    return np.ascontiguousarray(out.reshape(n, c * f * f, h // f, w // f))


def _shuffle_unpool_array(y, arrangement, factor, channels):
    n, cf, oh, ow = y.shape
    f = factor
    if channels * f * f != cf:
        raise ValueError(
            f"unpool: {cf} channels is not {channels} original channels x factor^2 ({f * f})"
        )
    if arrangement == "direct":
        v = y.reshape(n, f, f, channels, oh, ow).transpose(0, 3, 4, 1, 5, 2)
    elif arrangement == "insert":
        v = y.reshape(n, channels, f, f, oh, ow).transpose(0, 1, 4, 2, 5, 3)
    else:
        raise ValueError(f"unknown arrangement {arrangement!r}; choose from {ARRANGEMENTS}")
    return np.ascontiguousarray(v.reshape(n, channels, oh * f, ow * f))


def shuffle_pool(x, arrangement="insert", factor=2):
    """Space-to-depth rearrangement; (n, c, h, w) -> (n, c*factor^2, h/f, w/f)."""
    x = x if isinstance(x, Tensor) else Tensor(x)
    n, c, h, w = x.shape
    out = Tensor(_shuffle_pool_array(x.data, arrangement, factor), _needs_grad(x), (x,), None)
    if out.requires_grad:
        out._vjp = lambda g: (_shuffle_unpool_array(g, arrangement, factor, c),)
    return out


def shuffle_unpool(y, arrangement="insert", factor=2, original_channels=None):
    """Exact inverse of :func:`shuffle_pool` (bit-identical round trip)."""
    y = y if isinstance(y, Tensor) else Tensor(y)
    if original_channels is None:
        if y.shape[1] % (factor * factor):
            raise ValueError(f"{y.shape[1]} channels not divisible by factor^2 ({factor * factor})")
        original_channels = y.shape[1] // (factor * factor)
    out = Tensor(
        _shuffle_unpool_array(y.data, arrangement, factor, original_channels),
        _needs_grad(y),
        (y,),
        None,
    )
    if out.requires_grad:
        out._vjp = lambda g: (_shuffle_pool_array(g, arrangement, factor),)
    return out


def apply_pool(x, spec):
    """Dispatch one pooling step according to a PoolSpec."""
    if spec.kind == "max":
        return max_pool(x, spec.factor)
    if spec.kind == "avg":
        return avg_pool(x, spec.factor)
    return shuffle_pool(x, spec.kind.removeprefix("shuffle_"), spec.factor)


def retention_fraction(kind, factor, seed=0):
    """Fraction of input values a pooling step retains, as an exact rational.

    Measured by perturbing every input position of a random tensor with
    distinct values and counting positions whose perturbation changes the
    pooled output: each max window keeps exactly its argmax (1/factor^2),
    shuffle kinds keep everything (1).  Average pooling is reported as
    1/factor^2 as well: every input is influential, but the averaging map is
    rank-deficient and keeps only one degree of freedom per window.
    """
    spec = PoolSpec(kind, factor)
    if kind == "avg":
        return Fraction(1, factor * factor)

    shape = (1, 2, 2 * factor, 2 * factor)
    size = int(np.prod(shape))
    rng = np.random.default_rng(seed)
    base = (rng.permutation(size).astype(np.float64) / size).reshape(shape)
    # Values are spaced exactly 1/size apart, so this can never flip an argmax.
    delta = 1.0 / (4 * size)

    def pooled(arr):
        return apply_pool(Tensor(arr), spec).data

    reference = pooled(base)
    influential = 0
    flat = base.reshape(-1)
    for p in range(size):
        orig = flat[p]
        flat[p] = orig + delta
        if not np.array_equal(pooled(base), reference):
            influential += 1
        flat[p] = orig
    return Fraction(influential, size)
