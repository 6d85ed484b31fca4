"""Training losses and evaluation metrics.

Differentiable (built on the autodiff ops, usable as training losses):

* ``mse``   -- mean squared difference over every element.
* ``mge``   -- mean squared difference of Sobel gradient-magnitude maps,
  computed on the valid interior (no padding: padding would fabricate edges
  at the image border) and averaged across channels.
* ``ssim``  -- windowed structural similarity, per channel, averaged over
  all window positions and channels.
* ``mixe``  -- MSE + lambda_g * MGE + lambda_s * (1 - SSIM).  SSIM is a
  similarity, so by default it enters as (1 - SSIM), which makes the loss
  vanish on identical images; ``literal_ssim_sign=True`` adds the raw SSIM
  value instead.

Metric (plain float, evaluation boundary): ``psnr`` on 0..255-valued arrays,
``10*log10(255^2 / MSE)``, with +inf as the zero-MSE sentinel.

Losses run on [0, 1] float tensors; for 8-bit metric comparisons use
``LossConfig(dynamic_range=255.0)`` so the SSIM constants rescale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, mul, reshape, sqrt, sub, tmean
from .ops import conv2d

SOBEL_X = np.array([[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]])
SOBEL_Y = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])

SSIM_GAUSSIAN_SIZE = 11
SSIM_GAUSSIAN_SIGMA = 1.5
SSIM_UNIFORM_SIZE = 8


@dataclass
class LossConfig:
    """Loss weights and SSIM window settings.

    ``c1``/``c2`` default to ``(0.01*L)^2`` and ``(0.03*L)^2`` for dynamic
    range ``L`` unless overridden.
    """

    lambda_g: float = 0.1
    lambda_s: float = 0.1
    ssim_window: str = "gaussian"  # "gaussian" (11x11, sigma 1.5) | "uniform8" (8x8)
    dynamic_range: float = 1.0
    c1: float | None = None
    c2: float | None = None
    literal_ssim_sign: bool = False

    def __post_init__(self):
        if self.ssim_window not in ("gaussian", "uniform8"):
            raise ValueError(f"unknown ssim_window {self.ssim_window!r}")
        if not (math.isfinite(self.lambda_g) and math.isfinite(self.lambda_s)):
            raise ValueError("loss weights must be finite")
        if self.lambda_g < 0 or self.lambda_s < 0:
            raise ValueError("loss weights must be >= 0")
        if self.c1 is None:
            self.c1 = (0.01 * self.dynamic_range) ** 2
        if self.c2 is None:
            self.c2 = (0.03 * self.dynamic_range) ** 2


@dataclass
class GradientMaps:
    """Per-channel directional responses and their magnitude."""

    gx: Tensor
    gy: Tensor
    g: Tensor


def _check_pair(a, b, op):
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def mse(y_hat, y):
    """Mean squared difference over all elements (pixels, channels, batch)."""
    _check_pair(y_hat, y, "mse")
    d = sub(y_hat, y)
    return tmean(mul(d, d))


def sobel_gradients(y):
    """Sobel responses on the valid interior; magnitude sqrt(gx^2 + gy^2).

    The kernels are applied with the same cross-correlation convention as
    every other convolution here; the magnitude is invariant to flipping
    both kernels, so the convention does not affect downstream losses.
    """
    n, c, h, w = y.shape
    if h < 3 or w < 3:
        raise ValueError(f"sobel_gradients needs at least 3x3 input, got {h}x{w}")
    dtype = y.dtype
    kx = Tensor(SOBEL_X.astype(dtype).reshape(1, 1, 3, 3))
    ky = Tensor(SOBEL_Y.astype(dtype).reshape(1, 1, 3, 3))
    zero_bias = Tensor(np.zeros(1, dtype=dtype))

    flat = reshape(y, (n * c, 1, h, w))
    gx = reshape(conv2d(flat, kx, zero_bias), (n, c, h - 2, w - 2))
    gy = reshape(conv2d(flat, ky, zero_bias), (n, c, h - 2, w - 2))
    g = sqrt(mul(gx, gx) + mul(gy, gy))
    return GradientMaps(gx=gx, gy=gy, g=g)


def mge(y_hat, y):
    """Mean squared difference of gradient-magnitude maps (symmetric)."""
    _check_pair(y_hat, y, "mge")
    d = sub(sobel_gradients(y_hat).g, sobel_gradients(y).g)
    return tmean(mul(d, d))


def ssim_window(cfg):
    """Normalized window weights for the configured SSIM variant (float64)."""
    if cfg.ssim_window == "uniform8":
        k = SSIM_UNIFORM_SIZE
        return np.full((k, k), 1.0 / (k * k))
    k = SSIM_GAUSSIAN_SIZE
    r = np.arange(k) - (k - 1) / 2.0
    g1 = np.exp(-(r**2) / (2.0 * SSIM_GAUSSIAN_SIGMA**2))
    win = np.outer(g1, g1)
    return win / win.sum()


def ssim(y_hat, y, cfg=None):
    """Mean windowed SSIM across positions and channels; 1 iff identical.

    Uses windowed means, variances and covariance:
    ``(2*mu_x*mu_y + c1)(2*cov + c2) / ((mu_x^2 + mu_y^2 + c1)(var_x + var_y + c2))``.
    """
    cfg = cfg or LossConfig()
    _check_pair(y_hat, y, "ssim")
    n, c, h, w = y_hat.shape
    win = ssim_window(cfg)
    k = win.shape[0]
    if h < k or w < k:
        raise ValueError(f"ssim: image {h}x{w} smaller than {k}x{k} window")
    dtype = y_hat.dtype
    kernel = Tensor(win.astype(dtype).reshape(1, 1, k, k))
    zero_bias = Tensor(np.zeros(1, dtype=dtype))

    def windowed_mean(t):
        return conv2d(t, kernel, zero_bias)

    a = reshape(y_hat, (n * c, 1, h, w))
    b = reshape(y, (n * c, 1, h, w))
    mu_a = windowed_mean(a)
    mu_b = windowed_mean(b)
    var_a = sub(windowed_mean(mul(a, a)), mul(mu_a, mu_a))
    var_b = sub(windowed_mean(mul(b, b)), mul(mu_b, mu_b))
    cov = sub(windowed_mean(mul(a, b)), mul(mu_a, mu_b))

    c1, c2 = float(cfg.c1), float(cfg.c2)
    num = mul(mul(mu_a, mu_b) * 2.0 + c1, cov * 2.0 + c2)
    den = mul(mul(mu_a, mu_a) + mul(mu_b, mu_b) + c1, var_a + var_b + c2)
    return tmean(num / den)


def mixe(y_hat, y, cfg=None):
    """Mixed loss: MSE + lambda_g * MGE + lambda_s * SSIM term.

    Zero-weight terms are skipped entirely, so with both weights at 0 the
    computation is bit-identical to plain ``mse``.
    """
    cfg = cfg or LossConfig()
    total = mse(y_hat, y)
    if cfg.lambda_g != 0.0:
        total = total + cfg.lambda_g * mge(y_hat, y)
    if cfg.lambda_s != 0.0:
        s = ssim(y_hat, y, cfg)
        term = s if cfg.literal_ssim_sign else (1.0 - s)
        total = total + cfg.lambda_s * term
    return total


def psnr(y_hat, y):
    """Peak signal-to-noise ratio in dB on 0..255-valued arrays.

    All channels pooled into one MSE; identical inputs return +inf.
    """
    a = np.asarray(y_hat, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"psnr: shape mismatch {a.shape} vs {b.shape}")
    for name, arr in (("y_hat", a), ("y", b)):
        if arr.min() < 0.0 or arr.max() > 255.0:
            raise ValueError(f"psnr: {name} values outside [0, 255]")
    err = float(np.mean((a - b) ** 2))
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / err)
