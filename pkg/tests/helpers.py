"""Independent reference implementations used as test oracles.

These deliberately share no code with the package: plain loops, their own
kernel formulas, their own coordinate arithmetic.
"""

import numpy as np


def conv2d_loops(x, w, b, stride=1, padding=0):
    """Direct quadruple-loop cross-correlation."""
    n, cin, h, wid = x.shape
    cout, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wid + 2 * padding - kw) // stride + 1
    out = np.zeros((n, cout, oh, ow))
    for ni in range(n):
        for o in range(cout):
            for i in range(oh):
                for j in range(ow):
                    acc = 0.0
                    for c in range(cin):
                        for p in range(kh):
                            for q in range(kw):
                                acc += xp[ni, c, i * stride + p, j * stride + q] * w[o, c, p, q]
                    out[ni, o, i, j] = acc + b[o]
    return out


def ssim_reference(a, b, window, c1, c2):
    """Per-window SSIM loop over an (n, c, h, w) pair; window is (k, k), sum 1."""
    n, cc, h, w = a.shape
    k = window.shape[0]
    vals = []
    for ni in range(n):
        for ch in range(cc):
            for i in range(h - k + 1):
                for j in range(w - k + 1):
                    pa = a[ni, ch, i : i + k, j : j + k]
                    pb = b[ni, ch, i : i + k, j : j + k]
                    mu_a = float(np.sum(window * pa))
                    mu_b = float(np.sum(window * pb))
                    var_a = float(np.sum(window * pa * pa)) - mu_a * mu_a
                    var_b = float(np.sum(window * pb * pb)) - mu_b * mu_b
                    cov = float(np.sum(window * pa * pb)) - mu_a * mu_b
                    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
                    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
                    vals.append(num / den)
    return float(np.mean(vals))


def _cubic(t):
    # Written out from the two-branch cubic with a = -0.5.
    t = abs(t)
    if t <= 1.0:
        return 1.5 * t**3 - 2.5 * t**2 + 1.0
    if t < 2.0:
        return -0.5 * t**3 + 2.5 * t**2 - 4.0 * t + 2.0
    return 0.0


def resize_scalar(img, oh, ow, mode):
    """Loop resize of a 2-D image: half-pixel centers, clamped taps."""
    h, w = img.shape
    out = np.zeros((oh, ow))
    for i in range(oh):
        sy = (i + 0.5) * h / oh - 0.5
        for j in range(ow):
            sx = (j + 0.5) * w / ow - 0.5
            if mode == "nearest":
                r = min(max(int(np.floor(sy + 0.5)), 0), h - 1)
                c = min(max(int(np.floor(sx + 0.5)), 0), w - 1)
                out[i, j] = img[r, c]
                continue
            y0, x0 = int(np.floor(sy)), int(np.floor(sx))
            fy, fx = sy - y0, sx - x0
            if mode == "bilinear":
                offs = [(0, 1.0 - fy), (1, fy)]
                offs_x = [(0, 1.0 - fx), (1, fx)]
            else:
                offs = [(d, _cubic(fy - d)) for d in (-1, 0, 1, 2)]
                offs_x = [(d, _cubic(fx - d)) for d in (-1, 0, 1, 2)]
            acc = 0.0
            for dy, wy in offs:
                r = min(max(y0 + dy, 0), h - 1)
                for dx, wx in offs_x:
                    c = min(max(x0 + dx, 0), w - 1)
                    acc += wy * wx * img[r, c]
            out[i, j] = acc
    return out


def adam_scalar(p0, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Scalar Adam recurrence, independent bookkeeping."""
    p, m, v = p0, 0.0, 0.0
    history = []
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        p = p - lr * m_hat / (np.sqrt(v_hat) + eps)
        history.append(p)
    return history
