"""Figure rendering for the report path.

All figures are written to files (PNG) next to the delimited outputs; nothing
is shown interactively, so the Agg backend is forced before pyplot loads.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import FeatureRanking
from .dbn import TrainReport


def render_ranking_figure(ranking: FeatureRanking, path) -> None:
    """Horizontal bar chart of D_s per feature, best at the top."""
    names = ranking.names()
    values = [e.d_s for e in ranking.entries]
    fig, ax = plt.subplots(figsize=(7, 0.3 * len(names) + 1.2))
    y = np.arange(len(names))
    ax.barh(y, values, color="#2b6f8c")
    ax.set_yticks(y, names)
    ax.invert_yaxis()
    ax.set_xlabel("distribution separability $D_s$")
    ax.set_title("Feature ranking")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_layer_separability_figure(series: dict[str, list[float]], path) -> None:
    """Per-layer D_s of the mean activations, one line per model."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, values in series.items():
        ax.plot(range(1, len(values) + 1), values, marker="o", label=label)
    ax.set_xlabel("layer")
    ax.set_ylabel("$D_s$ of mean activation")
    ax.set_yscale("log")
    ax.set_title("Layer separability")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_hypersphere_figure(dims: list[int], values: list[float], path) -> None:
    """Relative unit-ball volume against dimension, log scale."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(dims, values, marker=".")
    ax.set_xlabel("dimension n")
    ax.set_ylabel("sphere volume / cube volume")
    ax.set_title("Relative hypersphere volume")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_training_curves(reports: dict[str, TrainReport], path) -> None:
    """Train/validation error per epoch for each trained model."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, report in reports.items():
        epochs = range(len(report.train_errors))
        (line,) = ax.plot(epochs, report.train_errors, label=f"{label} train")
        ax.plot(
            epochs,
            report.validation_errors,
            linestyle="--",
            color=line.get_color(),
            label=f"{label} validation",
        )
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean sum-squared error")
    ax.set_yscale("log")
    ax.set_title("Fine-tuning error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
