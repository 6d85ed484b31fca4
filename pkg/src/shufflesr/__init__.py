"""Single-image super-resolution with dense U-nets and shuffle pooling."""

from .autodiff import GradCheckReport, Tensor, grad_check
from .checkpoint import (
    Checkpoint,
    load_checkpoint,
    model_from_checkpoint,
    save_checkpoint,
)
from .data import DatasetSpec, SamplePair, dataset_iter, load_image, make_pair
from .losses import LossConfig, mge, mixe, mse, psnr, sobel_gradients, ssim
from .network import (
    Model,
    NetworkConfig,
    build_dense_unet,
    build_model,
    build_unet_sr,
    channel_ledger,
    forward,
    param_count,
    param_count_for_config,
)
from .ops import concat_channels, conv2d, maxpool2, relu, resize
from .optim import AdamState, adam_step
from .pooling import PoolSpec, retention_fraction, shuffle_pool, shuffle_unpool
from .trainer import TrainConfig, evaluate, lr_schedule, train

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "Checkpoint",
    "DatasetSpec",
    "GradCheckReport",
    "LossConfig",
    "Model",
    "NetworkConfig",
    "PoolSpec",
    "SamplePair",
    "Tensor",
    "TrainConfig",
    "adam_step",
    "build_dense_unet",
    "build_model",
    "build_unet_sr",
    "channel_ledger",
    "concat_channels",
    "conv2d",
    "dataset_iter",
    "evaluate",
    "forward",
    "grad_check",
    "load_checkpoint",
    "load_image",
    "lr_schedule",
    "make_pair",
    "maxpool2",
    "mge",
    "mixe",
    "model_from_checkpoint",
    "mse",
    "param_count",
    "param_count_for_config",
    "psnr",
    "relu",
    "resize",
    "retention_fraction",
    "save_checkpoint",
    "shuffle_pool",
    "shuffle_unpool",
    "sobel_gradients",
    "ssim",
    "train",
]
