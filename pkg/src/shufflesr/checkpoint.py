"""Binary checkpoint format (bit-exact round trips).

Layout, all integers little-endian:

    magic   4 bytes  b"DSRC"
    u32     format version (currently 1)
    u32     config JSON length, then that many UTF-8 bytes (network config)
    u32     parameter entry count, then that many tensor records
    u8      optimizer-state flag; if 1:
              u64 step count, u32 entry count, tensor records
              (names are "m:<param>" and "v:<param>")
    u32     epoch counter
    u32     RNG JSON length, then that many UTF-8 bytes (0 if absent)

    tensor record:
        u32 name length | UTF-8 name | u32 rank | u32 dims[rank] |
        u8 dtype tag (0 = float32, 1 = float64) | raw little-endian values

Loading re-reads exactly what was written: a wrong magic, an unknown
version, and a short file each raise their own error type.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .network import Model, NetworkConfig
from .optim import AdamState
from .pooling import PoolSpec

MAGIC = b"DSRC"
FORMAT_VERSION = 1
_DTYPE_TAGS = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_TAG_FOR_KIND = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


class CheckpointError(ValueError):
    pass


class BadMagicError(CheckpointError):
    pass


class UnsupportedVersionError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    version: int
    config: NetworkConfig
    params: dict  # name -> np.ndarray
    adam_m: dict | None
    adam_v: dict | None
    adam_t: int
    epoch: int
    rng_state: dict | None


def _config_to_json(cfg):
    return json.dumps(
        {
            "depth": cfg.depth,
            "base_channels": cfg.base_channels,
            "scale": cfg.scale,
            "pooling_kind": cfg.pooling.kind,
            "pooling_factor": cfg.pooling.factor,
            "skips": cfg.skips,
            "residual_output": cfg.residual_output,
        }
    )


def _config_from_json(blob):
    d = json.loads(blob)
    return NetworkConfig(
        depth=d["depth"],
        base_channels=d["base_channels"],
        scale=d["scale"],
        pooling=PoolSpec(d["pooling_kind"], d["pooling_factor"]),
        skips=d["skips"],
        residual_output=d["residual_output"],
    )


def _write_tensor(f, name, arr):
    if arr.dtype not in _TAG_FOR_KIND:
        raise CheckpointError(f"unsupported dtype {arr.dtype} for {name!r}")
    tag = _TAG_FOR_KIND[arr.dtype]
    encoded = name.encode("utf-8")
    f.write(struct.pack("<I", len(encoded)))
    f.write(encoded)
    f.write(struct.pack("<I", arr.ndim))
    for d in arr.shape:
        f.write(struct.pack("<I", d))
    f.write(struct.pack("<B", tag))
    f.write(np.ascontiguousarray(arr, dtype=_DTYPE_TAGS[tag]).tobytes())


def _read_exact(f, n):
    buf = f.read(n)
    if len(buf) != n:
        raise TruncatedCheckpointError(f"expected {n} bytes, got {len(buf)}")
    return buf


def _read_u32(f):
    return struct.unpack("<I", _read_exact(f, 4))[0]


def _read_tensor(f):
    name = _read_exact(f, _read_u32(f)).decode("utf-8")
    rank = _read_u32(f)
    dims = tuple(_read_u32(f) for _ in range(rank))
    tag = _read_exact(f, 1)[0]
    if tag not in _DTYPE_TAGS:
        raise CheckpointError(f"unknown dtype tag {tag} for {name!r}")
    dtype = _DTYPE_TAGS[tag]
    count = int(np.prod(dims, dtype=np.int64)) if dims else 1
    raw = _read_exact(f, count * dtype.itemsize)
    return name, np.frombuffer(raw, dtype=dtype).reshape(dims).copy()


def save_checkpoint(model, state, path, epoch=0, rng_state=None):
    """Write model parameters plus optional Adam/RNG state; returns the path."""
    path = Path(path)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        blob = _config_to_json(model.config).encode("utf-8")
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(struct.pack("<I", len(model.params)))
        for name, p in model.params.items():
            _write_tensor(f, name, p.data)
        if state is None:
            f.write(struct.pack("<B", 0))
        else:
            f.write(struct.pack("<B", 1))
            f.write(struct.pack("<Q", state.t))
            f.write(struct.pack("<I", len(state.m) + len(state.v)))
            for name, arr in state.m.items():
                _write_tensor(f, f"m:{name}", arr)
            for name, arr in state.v.items():
                _write_tensor(f, f"v:{name}", arr)
        f.write(struct.pack("<I", epoch))
        rng_blob = json.dumps(rng_state).encode("utf-8") if rng_state is not None else b""
        f.write(struct.pack("<I", len(rng_blob)))
        f.write(rng_blob)
    return path


def load_checkpoint(path):
    path = Path(path)
    with open(path, "rb") as f:
        if _read_exact(f, 4) != MAGIC:
            raise BadMagicError(f"{path} is not a checkpoint (bad magic)")
        version = _read_u32(f)
        if version != FORMAT_VERSION:
            raise UnsupportedVersionError(f"checkpoint version {version}, expected {FORMAT_VERSION}")
        config = _config_from_json(_read_exact(f, _read_u32(f)).decode("utf-8"))
        params = {}
        for _ in range(_read_u32(f)):
            name, arr = _read_tensor(f)
            params[name] = arr
        has_adam = _read_exact(f, 1)[0]
        adam_m = adam_v = None
        adam_t = 0
        if has_adam:
            adam_t = struct.unpack("<Q", _read_exact(f, 8))[0]
            adam_m, adam_v = {}, {}
            for _ in range(_read_u32(f)):
                name, arr = _read_tensor(f)
                kind, _, pname = name.partition(":")
                (adam_m if kind == "m" else adam_v)[pname] = arr
        epoch = _read_u32(f)
        rng_len = _read_u32(f)
        rng_state = json.loads(_read_exact(f, rng_len).decode("utf-8")) if rng_len else None
    return Checkpoint(
        version=version,
        config=config,
        params=params,
        adam_m=adam_m,
        adam_v=adam_v,
        adam_t=adam_t,
        epoch=epoch,
        rng_state=rng_state,
    )


def model_from_checkpoint(ck):
    """Rebuild a Model whose forward is bit-identical to the saved one."""
    params = {name: Tensor(arr, requires_grad=True) for name, arr in ck.params.items()}
    return Model(config=ck.config, params=params)


def adam_state_from_checkpoint(ck):
    if ck.adam_m is None:
        return None
    return AdamState(m=dict(ck.adam_m), v=dict(ck.adam_v), t=ck.adam_t)
