"""Training and evaluation loops.

Training follows a fixed protocol: Adam (beta1 0.9, beta2 0.999, eps 1e-8),
batch size 1 by default, initial learning rate 1e-3 halved every 50 epochs.
A run is a pure function of (seed, config, data) on a single execution
context: the same inputs give bit-identical parameter trajectories.

A non-finite loss aborts immediately with the offending sample named, rather
than skipping it, so numeric bugs surface.  Evaluation quantizes clamped
outputs to 8 bits and reports PSNR/SSIM per image next to the bicubic
baseline computed from the same pairs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .checkpoint import save_checkpoint
from .data import clip01, to_uint8
from .losses import LossConfig, mixe, mse, psnr, ssim
from .network import forward
from .ops import resize
from .optim import AdamState, adam_step


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 1
    batch_size: int = 1
    lr0: float = 1e-3
    halve_every: int = 50
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    loss: str = "mse"  # "mse" | "mixe"
    lambda_g: float = 0.1
    lambda_s: float = 0.1
    literal_ssim_sign: bool = False
    seed: int = 0
    shuffle: bool = False
    grad_clip: float | None = None  # global-norm threshold; off by default
    checkpoint_path: str | None = None
    checkpoint_every: int = 0  # epochs between saves; 0 = final only

    def __post_init__(self):
        if self.epochs < 1 or self.halve_every < 1 or self.batch_size < 1:
            raise ValueError("epochs, halve_every and batch_size must be >= 1")
        if self.lr0 <= 0:
            raise ValueError("lr0 must be > 0")
        if self.loss not in ("mse", "mixe"):
            raise ValueError(f"loss must be 'mse' or 'mixe', got {self.loss!r}")

    def loss_fn(self):
        if self.loss == "mse":
            return mse
        cfg = LossConfig(
            lambda_g=self.lambda_g,
            lambda_s=self.lambda_s,
            literal_ssim_sign=self.literal_ssim_sign,
        )
        return lambda y_hat, y: mixe(y_hat, y, cfg)


@dataclass
class EpochLog:
    epoch: int
    lr: float
    loss: float
    seconds: float


def lr_schedule(epoch, cfg):
    """lr0 halved once per ``halve_every`` epochs (epoch is 0-based)."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return cfg.lr0 * 0.5 ** (epoch // cfg.halve_every)


def _clip_gradients(params, threshold):
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    norm = math.sqrt(total)
    if norm > threshold:
        scale = threshold / norm
        for p in params.values():
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm


def train(model, pairs, cfg, state=None, start_epoch=0, rng_state=None):
    """Optimize ``model`` on a sequence of SamplePairs; returns epoch logs.

    ``state``/``start_epoch``/``rng_state`` allow deterministic resumption
    from a checkpoint; fresh runs leave them at their defaults.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("train: empty dataset")
    loss_fn = cfg.loss_fn()
    if state is None:
        state = AdamState.for_params(model.params)
    rng = np.random.default_rng(cfg.seed)
    if rng_state is not None:
        rng.bit_generator.state = rng_state
    t = state.t
    logs = []

    for epoch in range(start_epoch, start_epoch + cfg.epochs):
        began = time.perf_counter()
        lr = lr_schedule(epoch, cfg)
        order = rng.permutation(len(pairs)) if cfg.shuffle else np.arange(len(pairs))
        losses = []
        for lo in range(0, len(order), cfg.batch_size):
            chunk = [pairs[i] for i in order[lo : lo + cfg.batch_size]]
            ids = ",".join(p.id for p in chunk)
            x = Tensor(np.concatenate([p.lr for p in chunk], axis=0))
            y = Tensor(np.concatenate([p.hr for p in chunk], axis=0))
            for p in model.params.values():
                p.grad = None
            out = forward(model, x)
            loss = loss_fn(out, y)
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingDivergedError(
                    f"non-finite loss {value} at epoch {epoch} on sample(s) {ids}"
                )
            loss.backward()
            if cfg.grad_clip is not None:
                _clip_gradients(model.params, cfg.grad_clip)
            t += 1
            adam_step(
                model.params,
                {k: p.grad for k, p in model.params.items()},
                state,
                t,
                lr,
                cfg.beta1,
                cfg.beta2,
                cfg.eps,
            )
            losses.append(value)
        logs.append(
            EpochLog(
                epoch=epoch,
                lr=lr,
                loss=float(np.mean(losses)),
                seconds=time.perf_counter() - began,
            )
        )
        if cfg.checkpoint_path and cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(
                model, state, cfg.checkpoint_path, epoch=epoch + 1, rng_state=rng.bit_generator.state
            )
    if cfg.checkpoint_path:
        save_checkpoint(
            model,
            state,
            cfg.checkpoint_path,
            epoch=start_epoch + cfg.epochs,
            rng_state=rng.bit_generator.state,
        )
    return logs


METRIC_SSIM = LossConfig(dynamic_range=255.0)


@dataclass
class EvalRow:
    image_id: str
    psnr: float
    ssim: float


@dataclass
class EvalReport:
    """Per-image metrics for the model and the bicubic reference."""

    model_rows: list = field(default_factory=list)
    bicubic_rows: list = field(default_factory=list)

    @staticmethod
    def _mean(rows, attr):
        return float(np.mean([getattr(r, attr) for r in rows]))

    def summary(self):
        """Two rows: (label, mean PSNR, mean SSIM) for bicubic and model."""
        return [
            ("bicubic", self._mean(self.bicubic_rows, "psnr"), self._mean(self.bicubic_rows, "ssim")),
            ("model", self._mean(self.model_rows, "psnr"), self._mean(self.model_rows, "ssim")),
        ]


def _metrics_8bit(pred01, hr01):
    pred8 = to_uint8(clip01(pred01))
    hr8 = to_uint8(clip01(hr01))
    p = psnr(pred8, hr8)
    s = float(
        ssim(
            Tensor(pred8.astype(np.float64)),
            Tensor(hr8.astype(np.float64)),
            METRIC_SSIM,
        ).data
    )
    return p, s


def evaluate(model, pairs):
    """8-bit PSNR/SSIM per image plus the bicubic baseline on the same data."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("evaluate: empty dataset")
    report = EvalReport()
    for pair in pairs:
        hr_h, hr_w = pair.hr.shape[2], pair.hr.shape[3]
        sr = forward(model, Tensor(pair.lr)).data
        up = resize(Tensor(pair.lr), hr_h, hr_w, "bicubic").data
        mp, ms = _metrics_8bit(sr, pair.hr)
        bp, bs = _metrics_8bit(up, pair.hr)
        report.model_rows.append(EvalRow(pair.id, mp, ms))
        report.bicubic_rows.append(EvalRow(pair.id, bp, bs))
    return report
