"""Command-line interface: train, eval, infer, ablate, pool-analyze.

Every command is deterministic under a fixed seed, and every command that
produces an output directory drops the fully resolved config snapshot
(``config.ini``) into it.  Tables are written as CSV plus aligned text, with
a rendered PNG figure alongside.
"""

from __future__ import annotations

import argparse
import sys
from itertools import product
from pathlib import Path

import numpy as np
from PIL import Image

from .autodiff import Tensor
from .checkpoint import load_checkpoint, model_from_checkpoint
from .config import load_run_config, write_snapshot
from .data import clip01, dataset_iter, load_image, to_uint8
from .network import build_model, forward
from .pooling import POOL_KINDS, retention_fraction
from .report import (
    save_lambda_heatmap,
    save_method_bars,
    save_per_image_psnr,
    save_retention_bars,
    save_training_curve,
    write_csv,
    write_table,
)
from .trainer import evaluate, train

LAMBDA_GRID = (0.0, 0.05, 0.1, 0.2)
ABLATION_METHODS = (
    ("UnetSR", "unet", "max"),
    ("UnetSR(direct)", "unet", "shuffle_direct"),
    ("UnetSR(insert)", "unet", "shuffle_insert"),
    ("DenseSR", "dense", "max"),
    ("DenseSR(direct)", "dense", "shuffle_direct"),
    ("DenseSR(insert)", "dense", "shuffle_insert"),
)


def _overrides(args):
    mapping = {
        "train.seed": getattr(args, "seed", None),
        "network.scale": getattr(args, "scale", None),
        "network.pooling": getattr(args, "pooling", None),
        "network.depth": getattr(args, "depth", None),
        "network.base_channels": getattr(args, "base_channels", None),
        "loss.kind": getattr(args, "loss", None),
        "loss.lambda_g": getattr(args, "lambda_g", None),
        "loss.lambda_s": getattr(args, "lambda_s", None),
    }
    return {k: str(v) for k, v in mapping.items() if v is not None}


def _prepare_out_dir(args, cfg):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_snapshot(cfg, out / "config.ini")
    return out


def cmd_train(args):
    cfg = load_run_config(args.config, _overrides(args))
    out = _prepare_out_dir(args, cfg)
    pairs = list(dataset_iter(cfg.dataset_spec()))
    model = build_model(cfg.network_config(), seed=cfg.seed)
    tcfg = cfg.train_config(checkpoint_path=str(out / "checkpoint.dsrc"))
    logs = train(model, pairs, tcfg)
    write_csv(
        out / "log.csv",
        ["epoch", "lr", "loss", "seconds"],
        [(log.epoch, log.lr, log.loss, log.seconds) for log in logs],
    )
    save_training_curve(logs, out / "loss_curve.png")
    print(f"trained {len(logs)} epochs on {len(pairs)} pairs; final loss {logs[-1].loss:.6g}")
    print(f"artifacts in {out}")
    return 0


def cmd_eval(args):
    cfg = load_run_config(args.config, _overrides(args))
    ck = load_checkpoint(args.checkpoint)
    if args.scale is not None and args.scale != ck.config.scale:
        print(
            f"error: requested scale {args.scale} but checkpoint was trained at scale {ck.config.scale}",
            file=sys.stderr,
        )
        return 1
    cfg.scale = ck.config.scale
    out = _prepare_out_dir(args, cfg)
    pairs = list(dataset_iter(cfg.dataset_spec(split=args.split)))
    model = model_from_checkpoint(ck)
    report = evaluate(model, pairs)

    summary = report.summary()
    write_csv(out / "metrics.csv", ["method", "psnr", "ssim"], summary)
    write_table(out / "metrics.txt", ["method", "psnr", "ssim"], summary)
    per_image = [
        (m.image_id, m.psnr, m.ssim, b.psnr, b.ssim)
        for m, b in zip(report.model_rows, report.bicubic_rows)
    ]
    per_image.append(
        ("mean", summary[1][1], summary[1][2], summary[0][1], summary[0][2])
    )
    write_csv(
        out / "per_image.csv",
        ["image", "psnr", "ssim", "bicubic_psnr", "bicubic_ssim"],
        per_image,
    )
    save_per_image_psnr(report.model_rows, report.bicubic_rows, out / "per_image_psnr.png")
    sys.stdout.write(open(out / "metrics.txt", encoding="utf-8").read())
    print(f"artifacts in {out}")
    return 0


def cmd_infer(args):
    ck = load_checkpoint(args.checkpoint)
    model = model_from_checkpoint(ck)
    img = load_image(args.input)
    sr = forward(model, Tensor(img)).data
    out8 = to_uint8(clip01(sr))[0].transpose(1, 2, 0)
    Image.fromarray(out8, mode="RGB").save(args.output, format="PNG")
    print(f"{args.input} ({img.shape[3]}x{img.shape[2]}) -> {args.output} ({out8.shape[1]}x{out8.shape[0]})")
    return 0


def _run_cell(cfg, pairs, arch, pooling, loss_kind, lambda_g, lambda_s):
    """Train one ablation cell from scratch and evaluate on the same pairs."""
    cell = load_run_config(None, {})
    for field in cfg.__dataclass_fields__:
        setattr(cell, field, getattr(cfg, field))
    cell.arch = arch
    cell.pooling = pooling
    cell.loss = loss_kind
    cell.lambda_g = lambda_g
    cell.lambda_s = lambda_s
    model = build_model(cell.network_config(), seed=cell.seed)
    train(model, pairs, cell.train_config())
    report = evaluate(model, pairs)
    _, psnr_val, ssim_val = report.summary()[1]
    return psnr_val, ssim_val


def cmd_ablate(args):
    cfg = load_run_config(args.config, _overrides(args))
    out = _prepare_out_dir(args, cfg)
    pairs = list(dataset_iter(cfg.dataset_spec()))

    if args.axis == "pooling":
        rows = []
        for label, arch, pooling in ABLATION_METHODS:
            p, s = _run_cell(cfg, pairs, arch, pooling, cfg.loss, cfg.lambda_g, cfg.lambda_s)
            rows.append((label, pooling, p, s))
        header = ["method", "pooling", "psnr", "ssim"]
        write_csv(out / "pooling.csv", header, rows)
        write_table(out / "pooling.txt", header, rows)
        save_method_bars([r[0] for r in rows], [r[2] for r in rows], out / "pooling_psnr.png")
        sys.stdout.write(open(out / "pooling.txt", encoding="utf-8").read())
    else:
        rows = []
        grid = np.zeros((len(LAMBDA_GRID), len(LAMBDA_GRID)))
        for (i, lg), (j, ls) in product(enumerate(LAMBDA_GRID), enumerate(LAMBDA_GRID)):
            p, s = _run_cell(cfg, pairs, cfg.arch, cfg.pooling, "mixe", lg, ls)
            rows.append((lg, ls, p, s))
            grid[i, j] = p
        header = ["lambda_g", "lambda_s", "psnr", "ssim"]
        write_csv(out / "lambda_grid.csv", header, rows)
        write_table(out / "lambda_grid.txt", header, rows)
        save_lambda_heatmap(LAMBDA_GRID, LAMBDA_GRID, grid, out / "lambda_heatmap.png")
        sys.stdout.write(open(out / "lambda_grid.txt", encoding="utf-8").read())
    print(f"artifacts in {out}")
    return 0


def cmd_pool_analyze(args):
    cfg = load_run_config(args.config, _overrides(args))
    out = _prepare_out_dir(args, cfg)
    rows = [
        (kind, factor, repr(float(retention_fraction(kind, factor))))
        for kind in POOL_KINDS
        for factor in (2, 4)
    ]
    header = ["kind", "factor", "retained_fraction"]
    write_csv(out / "retention.csv", header, rows)
    write_table(out / "retention.txt", header, rows)
    save_retention_bars(rows, out / "retention.png")
    sys.stdout.write(open(out / "retention.txt", encoding="utf-8").read())
    print(f"artifacts in {out}")
    return 0


def _add_common(sp, default_out=None):
    sp.add_argument("--config", default=None, help="INI config file")
    sp.add_argument("--seed", type=int, default=None, help="override the run seed")
    sp.add_argument("--scale", type=int, choices=(2, 4, 8), default=None)
    sp.add_argument("--pooling", default=None, help="max | avg | shuffle-direct | shuffle-insert")
    sp.add_argument("--loss", choices=("mse", "mixe"), default=None)
    sp.add_argument("--lambda-g", dest="lambda_g", type=float, default=None)
    sp.add_argument("--lambda-s", dest="lambda_s", type=float, default=None)
    sp.add_argument("--depth", type=int, default=None)
    sp.add_argument("--base-channels", dest="base_channels", type=int, default=None)
    if default_out is not None:
        sp.add_argument("--out-dir", dest="out_dir", default=default_out)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="shufflesr",
        description="Super-resolution toolkit: dense U-net variants with shuffle pooling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write checkpoint + log")
    _add_common(p, "runs/train")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint against the bicubic baseline")
    _add_common(p, "runs/eval")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="super-resolve one image to a PNG")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("ablate", help="pooling-arrangement or loss-weight ablation grid")
    _add_common(p, "runs/ablate")
    p.add_argument("--axis", choices=("pooling", "lambda"), required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("pool-analyze", help="information retention of each pooling kind")
    _add_common(p, "runs/pool-analyze")
    p.set_defaults(func=cmd_pool_analyze)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
