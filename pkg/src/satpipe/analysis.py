"""Class-separability diagnostics and dimensionality estimates.

The distribution separability criterion of a feature is

    D_s = delta_mean / delta_sigma

where ``delta_mean`` is the mean absolute difference of class-conditional
means over all unordered class pairs and ``delta_sigma`` is the mean of the
class-conditional population standard deviations. Larger D_s means classes
are further apart relative to their spread. Ranking features by descending
D_s gives the feature ranking; applying the same scalar criterion to the mean
activation of each network layer gives the per-layer separability profile.

Intrinsic dimension is estimated with a k-nearest-neighbor maximum-likelihood
estimator (Levina-Bickel) averaged over 10 seeded rounds of up to 1000
sampled points each.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.neighbors import NearestNeighbors

from . import dbn
from .errors import DataError

EPSILON = 1e-12


@dataclass(frozen=True)
class SeparabilityReport:
    """Per-feature class-conditional statistics and the derived criterion."""

    classes: np.ndarray
    class_means: np.ndarray
    class_stds: np.ndarray
    delta_mean: np.ndarray
    delta_sigma: np.ndarray
    d_s: np.ndarray
    names: tuple[str, ...]


@dataclass(frozen=True)
class RankEntry:
    name: str
    delta_mean: float
    delta_sigma: float
    d_s: float


@dataclass(frozen=True)
class FeatureRanking:
    """Entries in descending D_s order; ties break by feature name."""

    entries: tuple[RankEntry, ...]

    def names(self) -> list[str]:
        return [e.name for e in self.entries]


@dataclass(frozen=True)
class IdEstimate:
    dimension: float
    k: int
    sample_size: int
    rounds: int


def separability(values: np.ndarray, labels: np.ndarray, names=None) -> SeparabilityReport:
    """Distribution separability of every column of a labeled matrix.

    Requires at least two classes. Columns whose ``delta_sigma`` underflows
    the epsilon guard report ``inf`` when the means differ and 0 otherwise.
    """
    m = np.asarray(values, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != len(m):
        raise ValueError("labels must parallel the value rows")
    classes = np.unique(labels)
    if len(classes) < 2:
        raise DataError("separability requires at least two classes")

    class_means = np.stack([m[labels == c].mean(axis=0) for c in classes])
    class_stds = np.stack([m[labels == c].std(axis=0) for c in classes])

    pair_count = 0
    delta_mean = np.zeros(m.shape[1])
    for i in range(len(classes)):
        for j in range(i + 1, len(classes)):
            delta_mean += np.abs(class_means[i] - class_means[j])
            pair_count += 1
    delta_mean /= pair_count
    delta_sigma = class_stds.mean(axis=0)

    d_s = np.zeros(m.shape[1])
    guarded = delta_sigma > EPSILON
    np.divide(delta_mean, delta_sigma, out=d_s, where=guarded)
    d_s = np.where(~guarded & (delta_mean > EPSILON), np.inf, d_s)

    if names is None:
        names = tuple(f"col_{i}" for i in range(m.shape[1]))
    return SeparabilityReport(
        classes, class_means, class_stds, delta_mean, delta_sigma, d_s, tuple(names)
    )


def rank_features(values: np.ndarray, labels: np.ndarray, names=None) -> FeatureRanking:
    """Features sorted by descending D_s with deterministic name tie-breaks."""
    report = separability(values, labels, names)
    entries = [
        RankEntry(name, float(dm), float(ds), float(s))
        for name, dm, ds, s in zip(report.names, report.delta_mean, report.delta_sigma, report.d_s)
    ]
    entries.sort(key=lambda e: (-e.d_s, e.name))
    return FeatureRanking(tuple(entries))


def layer_separability(
    model: dbn.DbnModel, data: np.ndarray, labels: np.ndarray, mode: str = "sample_mean"
) -> list[float]:
    """Separability of each hidden layer's activations.

    ``sample_mean`` (default) reduces each layer to one scalar per sample
    (mean over that layer's units) and reports its D_s; ``per_unit_mean``
    computes D_s per unit and averages the finite values.
    """
    hidden, _ = dbn.forward_activations(model, data)
    result = []
    for act in hidden:
        if mode == "sample_mean":
            result.append(float(separability(act.mean(axis=1), labels).d_s[0]))
        elif mode == "per_unit_mean":
            d_s = separability(act, labels).d_s
            finite = d_s[np.isfinite(d_s)]
            result.append(float(finite.mean()) if len(finite) else float("inf"))
        else:
            raise ValueError(f"unknown mode {mode!r}")
    return result


def _mle_round(points: np.ndarray, k: int) -> float:
    """Levina-Bickel MLE on one sample of points (duplicates already removed)."""
    nn = NearestNeighbors(n_neighbors=k + 1).fit(points)
    distances, _ = nn.kneighbors(points)
    distances = distances[:, 1:]  # drop self
    t_k = distances[:, -1]
    with np.errstate(divide="ignore"):
        logs = np.log(t_k[:, None] / distances[:, :-1])
    sums = logs.sum(axis=1)
    valid = np.isfinite(sums) & (sums > 0)
    if not np.any(valid):
        raise DataError("intrinsic dimension undefined: degenerate neighbor distances")
    return float(np.mean((k - 1) / sums[valid]))


def intrinsic_dimension(
    points: np.ndarray,
    k: int = 10,
    rounds: int = 10,
    sample_size: int = 1000,
    seed: int = 0,
) -> IdEstimate:
    """k-NN maximum-likelihood intrinsic dimension, averaged over sampling rounds.

    Parameters
    ----------
    points : (n, d) array
        Finite data points; duplicate rows within a round are dropped (with a
        warning) since zero distances break the likelihood.
    k : int
        Neighbor count; must satisfy ``2 <= k < n``.
    rounds, sample_size, seed : int
        Each round draws ``min(sample_size, n)`` points without replacement
        using an independently seeded generator; estimates are averaged.

    The estimate is invariant under rotation, translation, and uniform
    scaling of the point set (it depends only on neighbor-distance ratios).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-D array")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    n = len(pts)
    if k < 2 or n <= k:
        raise DataError(f"need n > k >= 2, got n={n}, k={k}")

    take = min(sample_size, n)
    estimates = []
    warned = False
    for child in np.random.SeedSequence(seed).spawn(rounds):
        rng = np.random.default_rng(child)
        sample = pts[rng.choice(n, size=take, replace=False)]
        unique = np.unique(sample, axis=0)
        if len(unique) < len(sample) and not warned:
            warnings.warn(
                f"dropped {len(sample) - len(unique)} duplicate points before k-NN",
                stacklevel=2,
            )
            warned = True
        if len(unique) <= k:
            raise DataError("too few distinct points for the requested k")
        estimates.append(_mle_round(unique, k))
    return IdEstimate(float(np.mean(estimates)), k, take, rounds)


def hypersphere_relative_volume(n: int) -> float:
    """Volume of the unit n-ball relative to its bounding cube of side 2.

    Computed as ``pi^(n/2) / (2^n * Gamma(n/2 + 1))`` via log-gamma; strictly
    decreasing in n and tending to zero, which is the curse-of-dimensionality
    argument for why feature spaces should stay low-dimensional.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError("dimension must be an integer >= 1")
    return math.exp(0.5 * n * math.log(math.pi) - n * math.log(2.0) - math.lgamma(0.5 * n + 1.0))


def ranking_to_csv(ranking: FeatureRanking, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "feature", "delta_mean", "delta_sigma", "d_s"])
        for rank, e in enumerate(ranking.entries, start=1):
            writer.writerow([rank, e.name, repr(e.delta_mean), repr(e.delta_sigma), repr(e.d_s)])


def ranking_to_json(ranking: FeatureRanking, path) -> None:
    doc = [
        {
            "rank": rank,
            "feature": e.name,
            "delta_mean": e.delta_mean,
            "delta_sigma": e.delta_sigma,
            "d_s": e.d_s,
        }
        for rank, e in enumerate(ranking.entries, start=1)
    ]
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def separability_to_json(report: SeparabilityReport, path) -> None:
    doc = [
        {
            "feature": name,
            "class_means": report.class_means[:, i].tolist(),
            "class_stds": report.class_stds[:, i].tolist(),
            "delta_mean": float(report.delta_mean[i]),
            "delta_sigma": float(report.delta_sigma[i]),
            "d_s": float(report.d_s[i]),
        }
        for i, name in enumerate(report.names)
    ]
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def separability_to_csv(report: SeparabilityReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "delta_mean", "delta_sigma", "d_s"])
        for i, name in enumerate(report.names):
            writer.writerow(
                [
                    name,
                    repr(float(report.delta_mean[i])),
                    repr(float(report.delta_sigma[i])),
                    repr(float(report.d_s[i])),
                ]
            )
