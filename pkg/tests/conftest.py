import numpy as np
import pytest
from PIL import Image


def synthetic_image(h, w, seed=0):
    """Deterministic natural-ish RGB test image: smooth shading, texture, hard edges."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    img = np.zeros((3, h, w))
    for c in range(3):
        img[c] = (
            0.45
            + 0.25 * np.sin(2 * np.pi * (c + 2) * xx / w) * np.cos(2 * np.pi * (c + 1) * yy / h)
            + 0.10 * np.sin(2 * np.pi * 7 * (xx + yy) / (h + w) + c)
        )
    for _ in range(6):  # sharp rectangles give bicubic something to lose
        r0, c0 = rng.integers(0, h - 4), rng.integers(0, w - 4)
        rh, cw = rng.integers(3, max(4, h // 3)), rng.integers(3, max(4, w // 3))
        img[:, r0 : r0 + rh, c0 : c0 + cw] = rng.random(3)[:, None, None]
    img += 0.02 * rng.standard_normal(img.shape)
    return np.clip(img, 0.0, 1.0)[np.newaxis]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_dataset(tmp_path):
    """Three small PNGs under root/train and root/test, sorted names."""
    root = tmp_path / "data"
    for split in ("train", "test"):
        d = root / split
        d.mkdir(parents=True)
        for i in range(3):
            img = synthetic_image(24, 20, seed=10 * i + (split == "test"))
            arr = np.clip(np.floor(img[0].transpose(1, 2, 0) * 255.0 + 0.5), 0, 255).astype(np.uint8)
            Image.fromarray(arr, "RGB").save(d / f"img{i}.png")
    return root
