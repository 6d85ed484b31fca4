"""Differentiable NCHW operators.

Conventions, fixed so results are reproducible bit-for-bit:

* ``conv2d`` is cross-correlation (no kernel flip), the usual deep-learning
  convention.
* ``relu`` has subgradient 0 at exactly 0.
* ``maxpool2`` routes its gradient to the first maximum in row-major window
  order when values tie.
* ``resize`` maps coordinates with half-pixel centers,
  ``src = (dst + 0.5) * in/out - 0.5``, clamps taps at the borders, and uses
  the cubic kernel with ``a = -0.5`` for bicubic mode.

Every operator is a pure function and registers a vector-Jacobian product on
its output, so anything built from them can be verified with
:func:`shufflesr.autodiff.grad_check`.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .autodiff import Tensor, _needs_grad

BICUBIC_A = -0.5


def _windows(xp, kh, kw, stride):
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    if stride > 1:
        win = win[:, :, ::stride, ::stride]
    return win  # (n, c, oh, ow, kh, kw)


def _corr(xp, w, stride):
    """Cross-correlate an already-padded NCHW array with (cout,cin,kh,kw) kernels."""
    win = _windows(xp, w.shape[2], w.shape[3], stride)
    out = np.tensordot(win, w, axes=((1, 4, 5), (1, 2, 3)))
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def conv2d(x, w, b, stride=1, padding=0):
    """2-D cross-correlation with bias.

    x: (n, c_in, h, w); w: (c_out, c_in, kh, kw); b: (c_out,).
    Output spatial size is ``floor((h + 2*padding - kh)/stride) + 1``.
    """
    x, w, b = (t if isinstance(t, Tensor) else Tensor(t) for t in (x, w, b))
    if x.ndim != 4 or w.ndim != 4:
        raise ValueError(f"conv2d expects rank-4 x and w, got {x.shape} and {w.shape}")
    n, cin, h, wid = x.shape
    cout, cin_w, kh, kw = w.shape
    if cin != cin_w:
        raise ValueError(f"conv2d: channel mismatch, input has {cin}, kernel expects {cin_w}")
    if b.shape != (cout,):
        raise ValueError(f"conv2d: bias shape {b.shape} != ({cout},)")
    if stride < 1 or padding < 0:
        raise ValueError("conv2d: stride must be >= 1 and padding >= 0")
    hp, wp = h + 2 * padding, wid + 2 * padding
    if kh > hp or kw > wp:
        raise ValueError(
            f"conv2d: kernel {kh}x{kw} larger than padded input {hp}x{wp}"
        )

    if padding:
        xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    else:
        xp = x.data
    out_data = _corr(xp, w.data, stride) + b.data.reshape(1, -1, 1, 1)

    out = Tensor(out_data, _needs_grad(x, w, b), (x, w, b), None)
    if out.requires_grad:
        oh, ow = out_data.shape[2], out_data.shape[3]

        def vjp(g):
            db = g.sum(axis=(0, 2, 3))
            win = _windows(xp, kh, kw, stride)
            dw = np.tensordot(g, win, axes=((0, 2, 3), (0, 2, 3)))
            # dx: dilate the output grad by the stride, then full-correlate
            # with the flipped kernel (in/out channels swapped).
            gh, gw = (oh - 1) * stride + 1, (ow - 1) * stride + 1
            extra_h, extra_w = hp - (gh + kh - 1), wp - (gw + kw - 1)
            gd = np.zeros(
                (n, cout, gh + 2 * (kh - 1) + extra_h, gw + 2 * (kw - 1) + extra_w),
                dtype=g.dtype,
            )
            gd[:, :, kh - 1 : kh - 1 + gh : stride, kw - 1 : kw - 1 + gw : stride] = g
            w_flip = w.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
            dxp = _corr(gd, w_flip, 1)
            dx = dxp[:, :, padding : padding + h, padding : padding + wid]
            return np.ascontiguousarray(dx), dw, db

        out._vjp = vjp
    return out


def relu(x):
    """Elementwise max(0, x); gradient is 0 at exactly 0."""
    out = Tensor(np.maximum(x.data, 0), _needs_grad(x), (x,), None)
    if out.requires_grad:
        mask = x.data > 0
        out._vjp = lambda g: (g * mask,)
    return out


def max_pool(x, factor=2):
    """Max pooling over disjoint factor x factor windows with matching stride.

    Ties route the gradient to the first maximum in row-major window order.
    """
    n, c, h, w = x.shape
    if h % factor or w % factor:
        raise ValueError(f"max_pool: {h}x{w} not divisible by {factor}")
    f = factor
    oh, ow = h // f, w // f
    windows = (
        x.data.reshape(n, c, oh, f, ow, f).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, oh, ow, f * f)
    )
    idx = windows.argmax(axis=-1)
    out_data = np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]

    out = Tensor(out_data, _needs_grad(x), (x,), None)
    if out.requires_grad:

        def vjp(g):
            scat = np.zeros((n, c, oh, ow, f * f), dtype=g.dtype)
            np.put_along_axis(scat, idx[..., None], g[..., None], axis=-1)
            dx = scat.reshape(n, c, oh, ow, f, f).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
            return (np.ascontiguousarray(dx),)

        out._vjp = vjp
    return out


def maxpool2(x):
    """2x2 max pooling with stride 2 (the network's down-sampling baseline)."""
    return max_pool(x, 2)


def avg_pool(x, factor=2):
    """Mean pooling over disjoint factor x factor windows."""
    n, c, h, w = x.shape
    if h % factor or w % factor:
        raise ValueError(f"avg_pool: {h}x{w} not divisible by {factor}")
    out_data = x.data.reshape(n, c, h // factor, factor, w // factor, factor).mean(axis=(3, 5))
    out = Tensor(out_data, _needs_grad(x), (x,), None)
    if out.requires_grad:
        scale = 1.0 / (factor * factor)
        out._vjp = lambda g: (
            np.repeat(np.repeat(g * scale, factor, axis=2), factor, axis=3),
        )
    return out


def pad2d(x, top, bottom, left, right):
    """Zero padding; supports the trailing-edge pad used before 2x2 convs."""
    n, c, h, w = x.shape
    out_data = np.pad(x.data, ((0, 0), (0, 0), (top, bottom), (left, right)))
    out = Tensor(out_data, _needs_grad(x), (x,), None)
    if out.requires_grad:
        out._vjp = lambda g: (
            np.ascontiguousarray(g[:, :, top : top + h, left : left + w]),
        )
    return out


def concat_channels(xs):
    """Concatenate along the channel axis, input order preserved."""
    xs = [t if isinstance(t, Tensor) else Tensor(t) for t in xs]
    if not xs:
        raise ValueError("concat_channels: empty input list")
    first = xs[0]
    for t in xs[1:]:
        if t.ndim != 4 or (t.shape[0], t.shape[2], t.shape[3]) != (
            first.shape[0],
            first.shape[2],
            first.shape[3],
        ):
            raise ValueError(
                f"concat_channels: mismatched shape {t.shape} vs {first.shape}"
            )
    out = Tensor(
        np.concatenate([t.data for t in xs], axis=1), _needs_grad(*xs), tuple(xs), None
    )
    if out.requires_grad:
        sizes = [t.shape[1] for t in xs]
        bounds = np.cumsum([0] + sizes)

        def vjp(g):
            return tuple(
                np.ascontiguousarray(g[:, bounds[i] : bounds[i + 1]])
                for i in range(len(sizes))
            )

        out._vjp = vjp
    return out


# -- resampling ---------------------------------------------------------------


def cubic_kernel(t, a=BICUBIC_A):
    """Keys cubic interpolation kernel; a = -0.5 is the Catmull-Rom member."""
    at = abs(float(t))
    if at <= 1.0:
        return (a + 2.0) * at**3 - (a + 3.0) * at**2 + 1.0
    if at < 2.0:
        return a * at**3 - 5.0 * a * at**2 + 8.0 * a * at - 4.0 * a
    return 0.0


@lru_cache(maxsize=256)
def resize_weights(n_in, n_out, mode):
    """Row-stochastic (n_out, n_in) tap matrix for one axis, float64.

    Half-pixel centers; out-of-range taps clamp to the border sample, which
    keeps every row summing to 1 so constants are preserved.
    """
    if mode not in ("nearest", "bilinear", "bicubic"):
        raise ValueError(f"resize: unknown mode {mode!r}")
    W = np.zeros((n_out, n_in), dtype=np.float64)
    scale = n_in / n_out
    for i in range(n_out):
        src = (i + 0.5) * scale - 0.5
        if mode == "nearest":
            j = min(max(int(np.floor(src + 0.5)), 0), n_in - 1)
            W[i, j] = 1.0
        else:
            j0 = int(np.floor(src))
            frac = src - j0
            if mode == "bilinear":
                taps = ((0, 1.0 - frac), (1, frac))
            else:
                taps = tuple((dj, cubic_kernel(frac - dj)) for dj in (-1, 0, 1, 2))
            for dj, wt in taps:
                j = min(max(j0 + dj, 0), n_in - 1)
                W[i, j] += wt
    W.setflags(write=False)
    return W


def resize(x, out_h, out_w, mode="bilinear"):
    """Separable resampling to (out_h, out_w); nearest | bilinear | bicubic.

    All modes are linear maps, so the gradient is the transposed tap matrix.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError("resize: output dims must be >= 1")
    n, c, h, w = x.shape
    wh = resize_weights(h, out_h, mode).astype(x.dtype, copy=False)
    ww = resize_weights(w, out_w, mode).astype(x.dtype, copy=False)
    t = np.tensordot(x.data, ww, axes=((3,), (1,)))  # (n, c, h, out_w)
    out_data = np.ascontiguousarray(
        np.tensordot(t, wh, axes=((2,), (1,))).transpose(0, 1, 3, 2)
    )
    out = Tensor(out_data, _needs_grad(x), (x,), None)
    if out.requires_grad:

        def vjp(g):
            t2 = np.tensordot(g, wh, axes=((2,), (0,)))  # (n, c, out_w, h)
            dx = np.tensordot(t2, ww, axes=((2,), (0,)))  # (n, c, h, w)
            return (np.ascontiguousarray(dx),)

        out._vjp = vjp
    return out
