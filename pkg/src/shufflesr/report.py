"""Table and figure emission for the CLI.

Every table goes out twice: machine-readable CSV and aligned text for eyes.
The matching matplotlib figure is rendered to a PNG next to the CSV (Agg
backend, no display needed).
"""

from __future__ import annotations

import csv
import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def fmt_value(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.6f}"
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt_value(v) for v in row])
    return path


def format_table(header, rows):
    """Aligned-text rendering of the same rows the CSV gets."""
    cells = [list(map(str, header))] + [[fmt_value(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = []
    for i, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def write_table(path, header, rows):
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_table(header, rows))
    return path


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_training_curve(logs, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    epochs = [log.epoch for log in logs]
    losses = [log.loss for log in logs]
    ax.plot(epochs, losses, marker="o", markersize=3)
    if min(losses) > 0:
        ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("training loss")
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)


def save_lambda_heatmap(lambda_gs, lambda_ss, psnr_grid, path):
    """PSNR over the (lambda_g, lambda_s) grid as an annotated heatmap."""
    grid = np.asarray(psnr_grid, dtype=float)
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    im = ax.imshow(grid, origin="lower", cmap="viridis")
    ax.set_xticks(range(len(lambda_ss)), [str(v) for v in lambda_ss])
    ax.set_yticks(range(len(lambda_gs)), [str(v) for v in lambda_gs])
    ax.set_xlabel("ssim weight")
    ax.set_ylabel("gradient weight")
    for i in range(grid.shape[0]):
        for j in range(grid.shape[1]):
            ax.text(j, i, f"{grid[i, j]:.2f}", ha="center", va="center", fontsize=8, color="w")
    fig.colorbar(im, ax=ax, label="PSNR (dB)")
    return _finish(fig, path)


def save_method_bars(labels, psnrs, path, ylabel="PSNR (dB)"):
    fig, ax = plt.subplots(figsize=(7, 4))
    xs = np.arange(len(labels))
    ax.bar(xs, psnrs, width=0.6)
    ax.set_xticks(xs, labels, rotation=20, ha="right")
    ax.set_ylabel(ylabel)
    ax.grid(True, axis="y", alpha=0.3)
    return _finish(fig, path)


def save_retention_bars(rows, path):
    """rows: (kind, factor, fraction)."""
    labels = [f"{kind}/{factor}" for kind, factor, _ in rows]
    fracs = [float(frac) for _, _, frac in rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    xs = np.arange(len(labels))
    ax.bar(xs, fracs, width=0.6)
    ax.axhline(1.0, color="gray", linestyle="--", linewidth=1)
    ax.set_xticks(xs, labels, rotation=20, ha="right")
    ax.set_ylabel("retained fraction")
    ax.set_ylim(0, 1.1)
    return _finish(fig, path)


def save_per_image_psnr(model_rows, bicubic_rows, path):
    labels = [r.image_id for r in model_rows]
    xs = np.arange(len(labels))
    width = 0.4
    cap = 99.0  # keep inf-PSNR bars drawable
    model = [min(r.psnr, cap) for r in model_rows]
    bicubic = [min(r.psnr, cap) for r in bicubic_rows]
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(labels) + 3), 4))
    ax.bar(xs - width / 2, bicubic, width, label="bicubic")
    ax.bar(xs + width / 2, model, width, label="model")
    ax.set_xticks(xs, labels, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("PSNR (dB)")
    ax.legend()
    ax.grid(True, axis="y", alpha=0.3)
    return _finish(fig, path)
