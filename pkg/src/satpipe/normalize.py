"""Per-feature min-max normalization of feature matrices to [0, 1].

Each column is rescaled as ``(F - F_min) / (F_max - F_min)`` with extrema
computed over the fitted matrix. The default pipeline fits train and test
matrices separately (each dataset normalized with its own extrema); applying
train statistics to foreign data is supported and leaves out-of-range values
unclamped.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NormalizationStats:
    """Column-wise minima and maxima of a fitted matrix."""

    minima: np.ndarray
    maxima: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "minima", np.asarray(self.minima, dtype=np.float64))
        object.__setattr__(self, "maxima", np.asarray(self.maxima, dtype=np.float64))
        if self.minima.shape != self.maxima.shape or self.minima.ndim != 1:
            raise ValueError("minima and maxima must be parallel 1-D vectors")
        if np.any(self.minima > self.maxima):
            raise ValueError("per-feature minimum exceeds maximum")

    @property
    def width(self) -> int:
        return len(self.minima)


def fit(matrix: np.ndarray) -> NormalizationStats:
    """Exact column extrema of a non-empty matrix."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1:
        raise ValueError("fit requires a matrix with at least one row")
    return NormalizationStats(m.min(axis=0), m.max(axis=0))


def apply(stats: NormalizationStats, matrix: np.ndarray) -> np.ndarray:
    """Rescale columns by the fitted extrema; degenerate columns map to 0."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != stats.width:
        raise ValueError(f"matrix width {m.shape} does not match stats width {stats.width}")
    span = stats.maxima - stats.minima
    out = np.zeros_like(m)
    np.divide(m - stats.minima, span, out=out, where=span > 0)
    return out


def fit_apply(matrix: np.ndarray) -> tuple[np.ndarray, NormalizationStats]:
    stats = fit(matrix)
    return apply(stats, matrix), stats


def save_stats_csv(stats: NormalizationStats, path, names=None) -> None:
    """Write per-feature extrema as CSV rows of (feature, min, max)."""
    names = list(names) if names is not None else [f"col_{i}" for i in range(stats.width)]
    if len(names) != stats.width:
        raise ValueError("names length must match stats width")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "min", "max"])
        for name, lo, hi in zip(names, stats.minima, stats.maxima):
            writer.writerow([name, repr(float(lo)), repr(float(hi))])


def load_stats_csv(path) -> tuple[NormalizationStats, list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["feature", "min", "max"]:
            raise ValueError("stats CSV must have feature,min,max columns")
        names, lows, highs = [], [], []
        for row in reader:
            names.append(row[0])
            lows.append(float(row[1]))
            highs.append(float(row[2]))
    return NormalizationStats(np.asarray(lows), np.asarray(highs)), names
