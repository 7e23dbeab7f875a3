"""Figures written next to the CSV/JSON outputs of training and evaluation."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_loss_curves(epochs: Sequence[dict], path: str | os.PathLike) -> Path:
    """Generator terms, critic losses and (if logged) validation PSNR per epoch."""
    with plt.rc_context(STYLE):
        has_val = any("val_psnr" in r for r in epochs)
        fig, axes = plt.subplots(1, 3 if has_val else 2, figsize=(9 if has_val else 6.5, 2.6))
        ep = [r["epoch"] for r in epochs]
        for key in ("adv", "cyc", "perc"):
            axes[0].plot(ep, [r[key] for r in epochs], marker=".", label=key)
        axes[0].set_xlabel("epoch")
        axes[0].set_title("generator terms")
        axes[0].legend(frameon=False)
        for key in ("D_X", "D_Y"):
            axes[1].plot(ep, [r[key] for r in epochs], marker=".", label=key)
        axes[1].set_xlabel("epoch")
        axes[1].set_title("critic losses")
        axes[1].legend(frameon=False)
        if has_val:
            axes[2].plot(ep, [r.get("val_psnr", np.nan) for r in epochs], marker=".", color="k")
            axes[2].set_xlabel("epoch")
            axes[2].set_ylabel("dB")
            axes[2].set_title("validation PSNR")
        fig.tight_layout()
        return _save(fig, path)


def plot_comparison(images: dict[str, np.ndarray], path: str | os.PathLike, vmin=0.0, vmax=255.0) -> Path:
    """Side-by-side display-range images, e.g. LDCT / denoised / NDCT."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(images), figsize=(2.2 * len(images), 2.4))
        for ax, (title, img) in zip(np.atleast_1d(axes), images.items()):
            ax.imshow(img, cmap="gray", vmin=vmin, vmax=vmax, interpolation="nearest")
            ax.set_title(title)
            ax.axis("off")
        fig.tight_layout()
        return _save(fig, path)


def plot_metric_summary(aggregates: dict, path: str | os.PathLike) -> Path:
    """One bar panel per metric, one bar per method, error bars = std over images."""
    cols = [c for c in ("psnr_db", "ssim", "pl", "snr", "cnr") if any(c in v for v in aggregates.values())]
    methods = list(aggregates)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(cols), figsize=(1.9 * len(cols) + 0.5, 2.4))
        for ax, col in zip(np.atleast_1d(axes), cols):
            means = [aggregates[m].get(col, {}).get("mean", np.nan) for m in methods]
            stds = [aggregates[m].get(col, {}).get("std", 0.0) for m in methods]
            ax.bar(range(len(methods)), means, yerr=stds, color="0.6", edgecolor="k", capsize=2)
            ax.set_xticks(range(len(methods)))
            ax.set_xticklabels(methods, rotation=30, ha="right")
            ax.set_title(col.upper().replace("_DB", " (dB)"))
        fig.tight_layout()
        return _save(fig, path)
