"""Run configuration: INI file + command-line overrides, schema-checked.

The file is plain key-value text with sections; every key is validated
against the schema below and unknown sections or keys are errors, so typos
fail loudly instead of silently training the wrong thing.  A fully resolved
snapshot is written next to every command's outputs for provenance.

The dataset root can be overridden without touching the file through the
``SHUFFLESR_DATA_ROOT`` environment variable (it wins over both the file and
the command line).
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, fields

from .data import DatasetSpec
from .losses import LossConfig
from .network import NetworkConfig
from .pooling import POOL_KINDS, PoolSpec
from .trainer import TrainConfig

SCHEMA_VERSION = 1
DATA_ROOT_ENV = "SHUFFLESR_DATA_ROOT"


class ConfigError(ValueError):
    pass


def _to_bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


def _to_opt_int(s):
    v = s.strip().lower()
    return None if v in ("", "none") else int(s)


def _to_opt_float(s):
    v = s.strip().lower()
    return None if v in ("", "none") else float(s)


def normalize_pooling(name):
    """Accept hyphen or underscore spellings of the pooling kinds."""
    kind = name.strip().lower().replace("-", "_")
    if kind not in POOL_KINDS:
        raise ConfigError(f"unknown pooling {name!r}; choose from {POOL_KINDS}")
    return kind


def _enum(options):
    def convert(s):
        v = s.strip().lower()
        if v not in options:
            raise ConfigError(f"expected one of {options}, got {s!r}")
        return v

    return convert


@dataclass
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    # network
    arch: str = "dense"  # dense | unet
    depth: int = 3
    base_channels: int = 64
    scale: int = 2
    pooling: str = "max"
    residual_output: bool = True
    # loss
    loss: str = "mse"  # mse | mixe
    lambda_g: float = 0.1
    lambda_s: float = 0.1
    ssim_window: str = "gaussian"
    literal_ssim_sign: bool = False
    # train
    epochs: int = 1
    batch_size: int = 1
    lr0: float = 1e-3
    halve_every: int = 50
    seed: int = 0
    shuffle: bool = False
    grad_clip: float | None = None
    checkpoint_every: int = 0
    # data
    data_root: str = ""
    split: str = "train"
    hr_size: int = 224
    patch_size: int | None = None

    def network_config(self):
        return NetworkConfig(
            depth=self.depth,
            base_channels=self.base_channels,
            scale=self.scale,
            pooling=PoolSpec(normalize_pooling(self.pooling), 2),
            skips="dense" if self.arch == "dense" else "one_way",
            residual_output=self.residual_output,
        )

    def loss_config(self):
        return LossConfig(
            lambda_g=self.lambda_g,
            lambda_s=self.lambda_s,
            ssim_window=self.ssim_window,
            literal_ssim_sign=self.literal_ssim_sign,
        )

    def train_config(self, checkpoint_path=None):
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr0=self.lr0,
            halve_every=self.halve_every,
            loss=self.loss,
            lambda_g=self.lambda_g,
            lambda_s=self.lambda_s,
            literal_ssim_sign=self.literal_ssim_sign,
            seed=self.seed,
            shuffle=self.shuffle,
            grad_clip=self.grad_clip,
            checkpoint_path=checkpoint_path,
            checkpoint_every=self.checkpoint_every,
        )

    def dataset_spec(self, split=None):
        root = os.environ.get(DATA_ROOT_ENV, "") or self.data_root
        if not root:
            raise ConfigError(
                f"no dataset root configured; set [data] root or ${DATA_ROOT_ENV}"
            )
        return DatasetSpec(
            root=root,
            split=split if split is not None else self.split,
            scale=self.scale,
            hr_size=self.hr_size,
            patch_size=self.patch_size,
            shuffle=False,  # ordering is the trainer's job
            seed=self.seed,
        )


# (section, key) -> (RunConfig field, converter)
SCHEMA = {
    ("meta", "schema_version"): ("schema_version", int),
    ("network", "arch"): ("arch", _enum(("dense", "unet"))),
    ("network", "depth"): ("depth", int),
    ("network", "base_channels"): ("base_channels", int),
    ("network", "scale"): ("scale", int),
    ("network", "pooling"): ("pooling", normalize_pooling),
    ("network", "residual_output"): ("residual_output", _to_bool),
    ("loss", "kind"): ("loss", _enum(("mse", "mixe"))),
    ("loss", "lambda_g"): ("lambda_g", float),
    ("loss", "lambda_s"): ("lambda_s", float),
    ("loss", "ssim_window"): ("ssim_window", _enum(("gaussian", "uniform8"))),
    ("loss", "literal_ssim_sign"): ("literal_ssim_sign", _to_bool),
    ("train", "epochs"): ("epochs", int),
    ("train", "batch_size"): ("batch_size", int),
    ("train", "lr0"): ("lr0", float),
    ("train", "halve_every"): ("halve_every", int),
    ("train", "seed"): ("seed", int),
    ("train", "shuffle"): ("shuffle", _to_bool),
    ("train", "grad_clip"): ("grad_clip", _to_opt_float),
    ("train", "checkpoint_every"): ("checkpoint_every", int),
    ("data", "root"): ("data_root", str),
    ("data", "split"): ("split", str),
    ("data", "hr_size"): ("hr_size", int),
    ("data", "patch_size"): ("patch_size", _to_opt_int),
}

_SECTION_ORDER = ("meta", "network", "loss", "train", "data")


def load_run_config(path=None, overrides=None):
    """Parse the INI file (if any), apply overrides, validate everything."""
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        for section in parser.sections():
            for key, raw in parser.items(section):
                _apply(cfg, section, key, raw)
    for dotted, raw in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        _apply(cfg, section, key, raw)
    if cfg.schema_version != SCHEMA_VERSION:
        raise ConfigError(
            f"config schema_version {cfg.schema_version} unsupported (expected {SCHEMA_VERSION})"
        )
    # Surface invalid combinations now rather than mid-run.
    cfg.network_config()
    cfg.loss_config()
    cfg.train_config()
    return cfg


def _apply(cfg, section, key, raw):
    try:
        field_name, convert = SCHEMA[(section, key)]
    except KeyError:
        raise ConfigError(f"unknown config key [{section}] {key}") from None
    try:
        setattr(cfg, field_name, convert(raw))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"bad value for [{section}] {key}: {raw!r} ({exc})") from exc


def _serialize(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def write_snapshot(cfg, path):
    """Write the fully resolved configuration as INI (provenance record)."""
    by_field = {field_name: (sec, key) for (sec, key), (field_name, _) in SCHEMA.items()}
    sections = {name: [] for name in _SECTION_ORDER}
    for f in fields(cfg):
        sec, key = by_field[f.name]
        sections[sec].append((key, _serialize(getattr(cfg, f.name))))
    with open(path, "w", encoding="utf-8") as out:
        for sec in _SECTION_ORDER:
            out.write(f"[{sec}]\n")
            for key, value in sections[sec]:
                out.write(f"{key} = {value}\n")
            out.write("\n")
    return path
