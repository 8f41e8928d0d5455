"""Rendering of study outputs: delimited curves plus matplotlib figures."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["write_rows_csv", "convergence_figure", "ablation_figure"]


def write_rows_csv(rows: list[dict], path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        raise ValueError("no rows to write")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def convergence_figure(rows: list[dict], path, title: str = "Convergence"):
    """Accuracy and (when present) excess-risk / level-set curves vs n."""
    ns = [r["n"] for r in rows]
    has_oracle = "excess_mean" in rows[0]
    ncols = 3 if has_oracle else 1
    fig, axes = plt.subplots(1, ncols, figsize=(4.2 * ncols, 3.4), squeeze=False)
    axes = axes[0]

    def band(ax, key, label, color):
        mean = [r[f"{key}_mean"] for r in rows]
        std = [r[f"{key}_std"] for r in rows]
        ax.plot(ns, mean, "o-", color=color, label=label)
        ax.fill_between(
            ns,
            [m - s for m, s in zip(mean, std)],
            [m + s for m, s in zip(mean, std)],
            alpha=0.2,
            color=color,
        )
        ax.set_xscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)

    band(axes[0], "accuracy", "accuracy", "tab:blue")
    if has_oracle:
        band(axes[1], "excess", "excess risk", "tab:red")
        band(axes[2], "levelset", "level-set error", "tab:green")
    fig.suptitle(title)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)


def ablation_figure(rows: list[dict], path, metric: str = "aupr_mean",
                    title: str = "Ablation"):
    labels = [str(r["value"]) for r in rows]
    means = [r[metric] for r in rows]
    stds = [r.get(metric.replace("mean", "std"), 0.0) for r in rows]
    fig, ax = plt.subplots(figsize=(1.2 * len(rows) + 3, 3.4))
    ax.bar(range(len(rows)), means, yerr=stds, capsize=4, color="tab:blue", alpha=0.8)
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel(metric)
    ax.set_title(title)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
