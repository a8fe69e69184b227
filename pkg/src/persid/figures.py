"""Figure rendering for the report paths; PNGs land next to the delimited
artifacts they visualize."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_pairwise_heatmap(matrix, path, truth_pairs=None, title=None) -> None:
    """Heatmap of pairwise strengths; ground-truth pairs get cross marks."""
    m = np.asarray(matrix, dtype=float)
    fig, ax = plt.subplots(figsize=(4.4, 3.8))
    im = ax.imshow(m, cmap="viridis")
    fig.colorbar(im, ax=ax, fraction=0.046)
    if truth_pairs:
        xs, ys = [], []
        for i, j in truth_pairs:
            xs += [j, i]
            ys += [i, j]
        ax.scatter(xs, ys, marker="x", c="red", s=28, linewidths=1.2)
    ax.set_xticks(range(m.shape[1]))
    ax.set_yticks(range(m.shape[0]))
    ax.set_xlabel("feature")
    ax.set_ylabel("feature")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_auc_bars(summaries, average_auc, path) -> None:
    """Per-function mean AUC with std error bars and the overall average."""
    labels = [f"F{s.fid}" for s in summaries]
    means = [s.mean_auc for s in summaries]
    stds = [s.std_auc for s in summaries]
    fig, ax = plt.subplots(figsize=(6.2, 3.2))
    ax.bar(labels, means, yerr=stds, capsize=3, color="steelblue")
    ax.axhline(average_auc, color="darkorange", linestyle="--", linewidth=1,
               label=f"average = {average_auc:.3f}")
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("AUC")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_saliency_map(grid, path, title=None) -> None:
    g = np.asarray(grid, dtype=float)
    fig, ax = plt.subplots(figsize=(3.6, 3.4))
    im = ax.imshow(g, cmap="hot")
    fig.colorbar(im, ax=ax, fraction=0.046)
    ax.set_xticks([])
    ax.set_yticks([])
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_training_curves(log, path) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    epochs = range(len(log.val_mse))
    ax.semilogy(epochs, log.train_mse, label="train")
    ax.semilogy(epochs, log.val_mse, label="validation")
    ax.axvline(log.best_epoch, color="gray", linestyle=":", linewidth=1,
               label=f"best epoch {log.best_epoch}")
    ax.set_xlabel("epoch")
    ax.set_ylabel("MSE")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_stability_diffs(report, path) -> None:
    """Per-candidate strength changes against the theoretical bound."""
    diffs = [c.diff for c in report.common]
    labels = ["{" + ",".join(map(str, c.features)) + "}" for c in report.common]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.5 * len(diffs) + 2), 3.2))
    ax.bar(range(len(diffs)), diffs, color="steelblue")
    ax.axhline(report.bound, color="red", linestyle="--", linewidth=1,
               label=f"bound = {report.bound:.4g}")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=60, fontsize=7, ha="right")
    ax.set_ylabel("|strength change|")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
