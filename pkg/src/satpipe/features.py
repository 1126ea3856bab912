"""Handcrafted patch features: HSI/NIR statistics, co-occurrence texture,
vegetation indices, and a DCT energy summary.

``extract`` computes the 22 ranked scalar features, in this fixed order:

==== ======================= ==========================================
idx  name                    definition
==== ======================= ==========================================
0    i_ccm_mean              co-occurrence mean of quantized intensity
1    h_ccm_sosvh             sum-of-squares variance of hue CCM
2    h_ccm_autoc             autocorrelation of hue CCM
3    s_ccm_mean              co-occurrence mean of quantized saturation
4    h_ccm_mean              co-occurrence mean of quantized hue
5    sr                      simple ratio, mean NIR/(Red+eps)
6    s_ccm_second_moment     energy of saturation CCM
7    i_ccm_second_moment     energy of intensity CCM
8    i_second_moment         E[I^2]
9    i_variance              population variance of I
10   nir_std                 population std of NIR
11   i_std                   population std of I
12   h_std                   population std of H
13   h_mean                  mean of H
14   i_mean                  mean of I
15   s_mean                  mean of S
16   i_ccm_covariance        covariance of intensity CCM
17   nir_mean                mean of NIR
18   arvi                    mean (NIR-(2R-B))/(NIR+(2R+B))
19   ndvi                    mean (NIR-R)/(NIR+R)
20   dct                     mean |DCT-II coeff| of I, DC excluded
21   evi                     mean G*(NIR-R)/(NIR+c_r*R-c_b*B+L)
==== ======================= ==========================================

Co-occurrence matrices (CCMs) are gray-level co-occurrence matrices computed
independently on uniformly quantized H, S, and I planes, accumulated
symmetrically over the configured offsets and normalized to sum 1. CCM
statistics index bins from 1 so that mean/autocorrelation match the classical
texture-feature definitions.

Note: the ARVI denominator here is ``NIR + (2*Red + Blue)``, which differs
from the more common ``NIR + 2*Red - Blue`` form; it is kept as-is
deliberately.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.fft import dctn

from .errors import GeometryError
from .patchio import Dataset

EPSILON = 1e-12

FEATURE_NAMES = (
    "i_ccm_mean",
    "h_ccm_sosvh",
    "h_ccm_autoc",
    "s_ccm_mean",
    "h_ccm_mean",
    "sr",
    "s_ccm_second_moment",
    "i_ccm_second_moment",
    "i_second_moment",
    "i_variance",
    "nir_std",
    "i_std",
    "h_std",
    "h_mean",
    "i_mean",
    "s_mean",
    "i_ccm_covariance",
    "nir_mean",
    "arvi",
    "ndvi",
    "dct",
    "evi",
)

# Extra CCM statistics available for ranking experiments; not part of the
# 22-feature vector.
EXTRA_CCM_STATS = ("entropy", "homogeneity", "contrast", "max_probability")
EXTRA_FEATURE_NAMES = tuple(
    f"{plane}_ccm_{stat}" for plane in ("h", "s", "i") for stat in EXTRA_CCM_STATS
)


@dataclass(frozen=True)
class FeatureConfig:
    """Extraction knobs: quantization levels, CCM offsets, EVI coefficients."""

    levels: int = 8
    offsets: tuple[tuple[int, int], ...] = ((0, 1),)
    evi_gain: float = 2.5
    evi_c_red: float = 6.0
    evi_c_blue: float = 7.5
    evi_l_soil: float = 1.0
    epsilon: float = EPSILON

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError("levels must be >= 2")
        if not self.offsets or any(dy == 0 and dx == 0 for dy, dx in self.offsets):
            raise ValueError("offsets must be non-empty and nonzero")


@dataclass(frozen=True)
class ScaledPlanes:
    """Per-band [0, 1] planes of one patch: HSI, NIR, and the raw RGB."""

    hue: np.ndarray
    saturation: np.ndarray
    intensity: np.ndarray
    nir: np.ndarray
    red: np.ndarray
    green: np.ndarray
    blue: np.ndarray


@dataclass(frozen=True)
class ChannelStats:
    mean: float
    std: float
    variance: float
    second_moment: float


@dataclass(frozen=True)
class CcmStats:
    mean: float
    autoc: float
    sosvh: float
    second_moment: float
    covariance: float


def rgb_to_hsi(patch: np.ndarray) -> ScaledPlanes:
    """Convert a ``(4, h, w)`` byte patch to HSI + NIR planes on [0, 1].

    Intensity is ``(r+g+b)/3``; saturation ``1 - 3*min(r,g,b)/(r+g+b)`` with
    S=0 at black pixels; hue uses the arccos form scaled to [0, 1), with H=0
    at achromatic pixels. Hue is treated as a linear quantity thereafter.
    """
    scaled = np.asarray(patch, dtype=np.float64) / 255.0
    r, g, b, nir = scaled[0], scaled[1], scaled[2], scaled[3]

    total = r + g + b
    intensity = total / 3.0

    saturation = np.zeros_like(total)
    nonblack = total > 0
    np.divide(3.0 * np.minimum(np.minimum(r, g), b), total, out=saturation, where=nonblack)
    saturation = np.where(nonblack, 1.0 - saturation, 0.0)

    num = 0.5 * ((r - g) + (r - b))
    den = np.sqrt((r - g) ** 2 + (r - b) * (g - b))
    chromatic = den > EPSILON
    cosine = np.ones_like(num)
    np.divide(num, den, out=cosine, where=chromatic)
    theta = np.arccos(np.clip(cosine, -1.0, 1.0))
    theta = np.where(b > g, 2.0 * np.pi - theta, theta)
    hue = np.where(chromatic, theta / (2.0 * np.pi), 0.0)

    return ScaledPlanes(hue, saturation, intensity, nir, r, g, b)


def quantize(plane: np.ndarray, levels: int) -> np.ndarray:
    """Uniformly bin a [0, 1] plane into integers 0..levels-1."""
    bins = np.floor(np.asarray(plane, dtype=np.float64) * levels).astype(np.int64)
    return np.minimum(bins, levels - 1)


def cooccurrence(qplane: np.ndarray, config: FeatureConfig) -> np.ndarray:
    """Normalized symmetric co-occurrence matrix of a quantized plane.

    Pairs ``(q[p], q[p+offset])`` are counted over all in-bounds pixels for
    every configured offset and its negation, then normalized to sum 1. The
    result is symmetric by construction.
    """
    q = np.asarray(qplane)
    levels = config.levels
    if q.min() < 0 or q.max() >= levels:
        raise ValueError("quantized values must lie in [0, levels)")
    h, w = q.shape
    counts = np.zeros((levels, levels), dtype=np.float64)
    for dy, dx in config.offsets:
        if abs(dy) >= h or abs(dx) >= w:
            raise GeometryError(f"offset ({dy}, {dx}) does not fit a {h}x{w} patch")
        src_r = slice(max(0, -dy), h - max(0, dy))
        src_c = slice(max(0, -dx), w - max(0, dx))
        dst_r = slice(max(0, dy), h - max(0, -dy))
        dst_c = slice(max(0, dx), w - max(0, -dx))
        a = q[src_r, src_c].ravel()
        b = q[dst_r, dst_c].ravel()
        pair_counts = np.bincount(a * levels + b, minlength=levels * levels)
        pair_counts = pair_counts.reshape(levels, levels)
        counts += pair_counts + pair_counts.T
    return counts / counts.sum()


def ccm_stats(ccm: np.ndarray) -> CcmStats:
    """Texture statistics of a co-occurrence matrix, with 1-based bin indices."""
    p = np.asarray(ccm, dtype=np.float64)
    levels = p.shape[0]
    idx = np.arange(1, levels + 1, dtype=np.float64)
    mu_x = float((p.sum(axis=1) * idx).sum())
    mu_y = float((p.sum(axis=0) * idx).sum())
    ii, jj = np.meshgrid(idx, idx, indexing="ij")
    return CcmStats(
        mean=mu_x,
        autoc=float((ii * jj * p).sum()),
        sosvh=float(((ii - mu_x) ** 2 * p).sum()),
        second_moment=float((p**2).sum()),
        covariance=float(((ii - mu_x) * (jj - mu_y) * p).sum()),
    )


def ccm_extra_stats(ccm: np.ndarray) -> dict[str, float]:
    """Optional CCM statistics (entropy, homogeneity, contrast, max prob)."""
    p = np.asarray(ccm, dtype=np.float64)
    levels = p.shape[0]
    idx = np.arange(1, levels + 1, dtype=np.float64)
    ii, jj = np.meshgrid(idx, idx, indexing="ij")
    positive = p[p > 0]
    return {
        "entropy": float(-(positive * np.log2(positive)).sum()),
        "homogeneity": float((p / (1.0 + np.abs(ii - jj))).sum()),
        "contrast": float(((ii - jj) ** 2 * p).sum()),
        "max_probability": float(p.max()),
    }


def channel_stats(plane: np.ndarray) -> ChannelStats:
    """Population mean/std/variance/second moment of a plane.

    Constant planes short-circuit so their dispersion is exactly zero rather
    than summation noise on the order of 1e-33.
    """
    x = np.asarray(plane, dtype=np.float64)
    if x.max() == x.min():
        value = float(x.flat[0])
        return ChannelStats(mean=value, std=0.0, variance=0.0, second_moment=value * value)
    mean = float(x.mean())
    variance = float(((x - mean) ** 2).mean())
    return ChannelStats(
        mean=mean,
        std=float(np.sqrt(variance)),
        variance=variance,
        second_moment=float((x**2).mean()),
    )


def _guarded_ratio_mean(num: np.ndarray, den: np.ndarray, epsilon: float) -> float:
    """Mean of num/den over pixels, with |den| <= epsilon pixels contributing 0."""
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=np.abs(den) > epsilon)
    return float(out.mean())


def ndvi(planes: ScaledPlanes, epsilon: float = EPSILON) -> float:
    """Normalized difference vegetation index (NIR-R)/(NIR+R), patch-averaged."""
    return _guarded_ratio_mean(planes.nir - planes.red, planes.nir + planes.red, epsilon)


def evi(
    planes: ScaledPlanes,
    gain: float = 2.5,
    c_red: float = 6.0,
    c_blue: float = 7.5,
    l_soil: float = 1.0,
    epsilon: float = EPSILON,
) -> float:
    """Enhanced vegetation index G*(NIR-R)/(NIR+c_r*R-c_b*B+L), patch-averaged."""
    den = planes.nir + c_red * planes.red - c_blue * planes.blue + l_soil
    return gain * _guarded_ratio_mean(planes.nir - planes.red, den, epsilon)


def arvi(planes: ScaledPlanes, epsilon: float = EPSILON) -> float:
    """Atmospherically resistant index (NIR-(2R-B))/(NIR+(2R+B)), patch-averaged."""
    num = planes.nir - (2.0 * planes.red - planes.blue)
    den = planes.nir + (2.0 * planes.red + planes.blue)
    return _guarded_ratio_mean(num, den, epsilon)


def simple_ratio(planes: ScaledPlanes, epsilon: float = EPSILON) -> float:
    """Simple ratio NIR/(R+eps), patch-averaged."""
    return float((planes.nir / (planes.red + epsilon)).mean())


def dct_feature(plane: np.ndarray) -> float:
    """Mean absolute orthonormal 2-D DCT-II coefficient, DC excluded."""
    coeffs = dctn(np.asarray(plane, dtype=np.float64), type=2, norm="ortho")
    total = np.abs(coeffs).sum() - abs(coeffs[0, 0])
    return float(total / (coeffs.size - 1))


def extract(patch: np.ndarray, config: FeatureConfig | None = None) -> np.ndarray:
    """Compute the 22-feature vector of one patch, in FEATURE_NAMES order."""
    cfg = config or FeatureConfig()
    planes = rgb_to_hsi(patch)

    h_ccm = ccm_stats(cooccurrence(quantize(planes.hue, cfg.levels), cfg))
    s_ccm = ccm_stats(cooccurrence(quantize(planes.saturation, cfg.levels), cfg))
    i_ccm = ccm_stats(cooccurrence(quantize(planes.intensity, cfg.levels), cfg))
    h_stats = channel_stats(planes.hue)
    s_stats = channel_stats(planes.saturation)
    i_stats = channel_stats(planes.intensity)
    nir_stats = channel_stats(planes.nir)

    return np.array(
        [
            i_ccm.mean,
            h_ccm.sosvh,
            h_ccm.autoc,
            s_ccm.mean,
            h_ccm.mean,
            simple_ratio(planes, cfg.epsilon),
            s_ccm.second_moment,
            i_ccm.second_moment,
            i_stats.second_moment,
            i_stats.variance,
            nir_stats.std,
            i_stats.std,
            h_stats.std,
            h_stats.mean,
            i_stats.mean,
            s_stats.mean,
            i_ccm.covariance,
            nir_stats.mean,
            arvi(planes, cfg.epsilon),
            ndvi(planes, cfg.epsilon),
            dct_feature(planes.intensity),
            evi(planes, cfg.evi_gain, cfg.evi_c_red, cfg.evi_c_blue, cfg.evi_l_soil, cfg.epsilon),
        ],
        dtype=np.float64,
    )


def extract_extras(patch: np.ndarray, config: FeatureConfig | None = None) -> np.ndarray:
    """Optional CCM statistics (EXTRA_FEATURE_NAMES order) for ranking demos."""
    cfg = config or FeatureConfig()
    planes = rgb_to_hsi(patch)
    values = []
    for plane in (planes.hue, planes.saturation, planes.intensity):
        stats = ccm_extra_stats(cooccurrence(quantize(plane, cfg.levels), cfg))
        values.extend(stats[name] for name in EXTRA_CCM_STATS)
    return np.array(values, dtype=np.float64)


def extract_batch(
    dataset: Dataset, config: FeatureConfig | None = None, workers: int = 1
) -> np.ndarray:
    """Extract features for every patch; row i corresponds to patch i.

    The result is identical regardless of ``workers``: extraction is pure per
    patch and rows are gathered in order.
    """
    cfg = config or FeatureConfig()
    if len(dataset) == 0:
        raise ValueError("cannot extract features from an empty dataset")
    if workers <= 1 or len(dataset) < 4 * workers:
        return np.stack([extract(p, cfg) for p in dataset.patches])
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, len(dataset) // (workers * 8))
        rows = list(pool.map(partial(extract, config=cfg), dataset.patches, chunksize=chunk))
    return np.stack(rows)


def write_feature_csv(path, matrix: np.ndarray, labels: np.ndarray, names=FEATURE_NAMES) -> None:
    """Write a labeled feature matrix as CSV with full-precision decimals."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != len(names):
        raise ValueError(f"matrix must be (n, {len(names)})")
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["label", *names]) + "\n")
        for label, row in zip(labels, matrix):
            fh.write(",".join([str(int(label)), *(repr(float(v)) for v in row)]) + "\n")


def read_feature_csv(path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Read a labeled feature CSV; returns (matrix, labels, feature names)."""
    with open(path, newline="") as fh:
        header = fh.readline().strip().split(",")
        if not header or header[0] != "label":
            raise ValueError("feature CSV must start with a label column")
        names = header[1:]
        labels, rows = [], []
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != len(header):
                raise ValueError("feature CSV row width mismatch")
            labels.append(int(parts[0]))
            rows.append([float(v) for v in parts[1:]])
    matrix = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(names))
    return matrix, np.asarray(labels, dtype=np.int64), names
