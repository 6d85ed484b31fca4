"""Dataset ingestion and LR/HR pair generation.

Source images (PNG/JPEG trees laid out as plain directories, e.g. the SET14
/ BSD300 / ICDAR2003 folders; see scripts/get_datasets.sh for where to obtain
them) are decoded to RGB, resized to a square ``hr_size`` with bicubic
interpolation (aspect ratio is intentionally not preserved), and bicubic
down-scaled by the chosen factor to form the LR side.  8-bit to float is an
exact ``/255``; float to 8-bit is round-half-up with clamping.

Iteration is deterministic: lexicographic filename order, optional seeded
shuffling, optional seeded random patch cropping for desk-scale training
(HR patch coordinates are LR coordinates times the scale, so patches stay
aligned).  Emitted pairs are immutable snapshots and safe to hand to a
prefetching consumer.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .autodiff import Tensor
from .ops import resize

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


class DatasetError(ValueError):
    """Unreadable file, unsupported format, or an unusable dataset layout."""


@dataclass(frozen=True)
class SamplePair:
    """One training/evaluation example: HR tensor and its bicubic LR."""

    hr: np.ndarray  # (1, 3, H, H) float in [0, 1]
    lr: np.ndarray  # (1, 3, H/scale, H/scale)
    id: str

    def __post_init__(self):
        if self.hr.shape[2] != self.lr.shape[2] * self.scale or self.hr.shape[3] != self.lr.shape[3] * self.scale:
            raise DatasetError(f"pair {self.id}: HR {self.hr.shape} is not LR {self.lr.shape} x scale")

    @property
    def scale(self):
        return self.hr.shape[2] // self.lr.shape[2]


@dataclass
class DatasetSpec:
    root: Path
    split: str = "train"
    scale: int = 2
    hr_size: int = 224
    patch_size: int | None = None
    shuffle: bool = False
    seed: int = 0

    def __post_init__(self):
        self.root = Path(self.root)
        if self.scale not in (2, 4, 8):
            raise DatasetError(f"scale must be 2, 4 or 8, got {self.scale}")
        if self.hr_size % self.scale:
            raise DatasetError(f"hr_size {self.hr_size} not divisible by scale {self.scale}")
        if self.patch_size is not None:
            if self.patch_size % self.scale:
                raise DatasetError(
                    f"patch_size {self.patch_size} not divisible by scale {self.scale}"
                )
            if self.patch_size > self.hr_size:
                raise DatasetError("patch_size larger than hr_size")

    def directory(self):
        d = self.root / self.split
        if not d.is_dir():
            raise DatasetError(f"dataset directory not found: {d}")
        return d


def to_uint8(x01):
    """[0,1] floats -> uint8, round half up with clamping."""
    return np.clip(np.floor(np.asarray(x01) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def from_uint8(u8):
    """uint8 -> float64 in [0,1], exactly value/255."""
    return np.asarray(u8).astype(np.float64) / 255.0


def clip01(x):
    return np.clip(x, 0.0, 1.0)


def load_image(path):
    """Decode a PNG/JPEG into a (1, 3, h, w) float64 array in [0, 1] (RGB).

    Grayscale sources are replicated to 3 channels; alpha is dropped.
    """
    path = Path(path)
    try:
        with Image.open(path) as img:
            img = img.convert("RGB")
            arr = np.asarray(img, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DatasetError(f"cannot decode image {path}: {exc}") from exc
    chw = from_uint8(arr).transpose(2, 0, 1)
    return chw[np.newaxis]


def make_pair(img, scale, hr_size=224, image_id=""):
    """Resize to hr_size^2 (bicubic), bicubic down-scale by ``scale``.

    Bicubic overshoot is clamped back into [0, 1] on both sides.
    """
    if scale not in (2, 4, 8):
        raise DatasetError(f"scale must be 2, 4 or 8, got {scale}")
    t = img if isinstance(img, Tensor) else Tensor(img)
    hr = clip01(resize(t, hr_size, hr_size, "bicubic").data)
    lr = clip01(resize(Tensor(hr), hr_size // scale, hr_size // scale, "bicubic").data)
    return SamplePair(hr=hr, lr=lr, id=image_id)


def list_images(directory):
    files = sorted(
        p for p in Path(directory).iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not files:
        raise DatasetError(f"no PNG/JPEG images in {directory}")
    return files


def _crop_patch(pair, patch_size, rng):
    lr_patch = patch_size // pair.scale
    max_r = pair.lr.shape[2] - lr_patch
    max_c = pair.lr.shape[3] - lr_patch
    r = int(rng.integers(0, max_r + 1))
    c = int(rng.integers(0, max_c + 1))
    s = pair.scale
    return SamplePair(
        hr=pair.hr[:, :, r * s : r * s + patch_size, c * s : c * s + patch_size].copy(),
        lr=pair.lr[:, :, r : r + lr_patch, c : c + lr_patch].copy(),
        id=f"{pair.id}@{r},{c}",
    )


def dataset_iter(spec, epoch=0):
    """Yield SamplePairs for one pass; byte-identical for equal (spec, epoch).

    Files come in sorted order; with ``spec.shuffle`` the order is permuted
    by a generator seeded with (seed, epoch), and patch cropping draws from
    the same generator.
    """
    files = list_images(spec.directory())
    rng = np.random.default_rng((spec.seed, epoch))
    if spec.shuffle:
        files = [files[i] for i in rng.permutation(len(files))]
    for path in files:
        pair = make_pair(load_image(path), spec.scale, spec.hr_size, image_id=path.stem)
        if spec.patch_size is not None:
            pair = _crop_patch(pair, spec.patch_size, rng)
        yield pair
