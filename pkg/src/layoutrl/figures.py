"""Matplotlib figures for training logs and evaluation reports.

These render PNGs next to the text/JSON outputs.  PNG encoding is not
guaranteed byte-stable across library versions, so determinism checks
compare the text artifacts only; the figures are for people.
"""

import csv
import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluate import EvalReport  # noqa: E402

_DPI = 120


def _read_metrics(metrics_path) -> dict[str, list[float]]:
    cols: dict[str, list[float]] = {}
    with open(metrics_path, newline="") as fh:
        for row in csv.DictReader(fh):
            for key, value in row.items():
                cols.setdefault(key, []).append(float(value))
    if not cols:
        raise ValueError(f"metrics log {metrics_path} is empty")
    return cols


def training_curves(metrics_path, out_path) -> None:
    """Loss, episode-end IoU, and exploration rate against episodes."""
    cols = _read_metrics(metrics_path)
    episodes = cols["episode"]
    fig, axes = plt.subplots(1, 3, figsize=(12.0, 3.6))

    ax = axes[0]
    for key, label in (("loss_xy", "floor plan"), ("loss_yz", "elevation")):
        pairs = [(e, v) for e, v in zip(episodes, cols[key])
                 if not math.isnan(v)]
        if pairs:
            ax.plot(*zip(*pairs), label=label, linewidth=1.0)
    ax.set_xlabel("episode")
    ax.set_ylabel("TD loss")
    ax.legend(fontsize=8)

    ax = axes[1]
    for key, label in (("iou_xy", "xy"), ("iou_yz", "yz"), ("iou_3d", "3d")):
        ax.plot(episodes, cols[key], label=label, linewidth=1.0)
    ax.set_xlabel("episode")
    ax.set_ylabel("episode-end IoU")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=8)

    ax = axes[2]
    ax.plot(episodes, cols["epsilon_xy"], label="floor plan", linewidth=1.0)
    ax.plot(episodes, cols["epsilon_yz"], label="elevation",
            linewidth=1.0, linestyle="--")
    ax.set_xlabel("episode")
    ax.set_ylabel("exploration rate")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=8)

    fig.tight_layout()
    fig.savefig(out_path, dpi=_DPI)
    plt.close(fig)


def report_bars(report: EvalReport, out_path) -> None:
    """Mean IoU per room type, trained policy next to the random baseline."""
    types = report.types
    metrics = (("xy", "mean_xy", "std_xy", "base_mean_xy", "base_std_xy"),
               ("yz", "mean_yz", "std_yz", "base_mean_yz", "base_std_yz"),
               ("3d", "mean_3d", "std_3d", "base_mean_3d", "base_std_3d"))
    fig, axes = plt.subplots(1, len(metrics),
                             figsize=(3.6 * len(metrics), 3.6), squeeze=False)
    positions = range(len(types))
    labels = [t.room_type for t in types]
    width = 0.38
    for ax, (title, mean_f, std_f, bmean_f, bstd_f) in zip(axes[0], metrics):
        ax.bar([p - width / 2 for p in positions],
               [getattr(t, mean_f) for t in types], width,
               yerr=[getattr(t, std_f) for t in types],
               capsize=3, label="policy", color="#4472c4")
        ax.bar([p + width / 2 for p in positions],
               [getattr(t, bmean_f) for t in types], width,
               yerr=[getattr(t, bstd_f) for t in types],
               capsize=3, label="random", color="#c0c0c0")
        ax.set_xticks(list(positions))
        ax.set_xticklabels(labels, fontsize=8)
        ax.set_ylim(0.0, 1.05)
        ax.set_title(f"final IoU ({title})", fontsize=10)
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=_DPI)
    plt.close(fig)
