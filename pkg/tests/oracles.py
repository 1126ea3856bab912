"""Independent brute-force re-implementations used as test oracles.

Everything here is written against the definitions directly: per-pixel Python
loops, math.fsum accumulation, explicit pair enumeration for co-occurrence,
an explicit cosine basis for the DCT, and exhaustive state enumeration for
RBM distributions. Nothing imports the implementation paths it checks.
"""

import itertools
import math

import numpy as np


def hsi_pixel(r, g, b):
    """HSI of one [0, 1] RGB pixel via the arccos formula."""
    total = r + g + b
    intensity = total / 3.0
    if total > 0:
        saturation = 1.0 - 3.0 * min(r, g, b) / total
    else:
        saturation = 0.0
    num = 0.5 * ((r - g) + (r - b))
    den = math.sqrt((r - g) ** 2 + (r - b) * (g - b))
    if den <= 1e-12:
        hue = 0.0
    else:
        theta = math.acos(max(-1.0, min(1.0, num / den)))
        if b > g:
            theta = 2.0 * math.pi - theta
        hue = theta / (2.0 * math.pi)
    return hue, saturation, intensity


def hsi_planes(patch):
    """Loop-based HSI + NIR planes of a byte patch."""
    bands, h, w = patch.shape
    hue = np.zeros((h, w))
    sat = np.zeros((h, w))
    inten = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            r, g, b = (patch[0, y, x] / 255.0, patch[1, y, x] / 255.0, patch[2, y, x] / 255.0)
            hue[y, x], sat[y, x], inten[y, x] = hsi_pixel(r, g, b)
    return hue, sat, inten, patch[3].astype(float) / 255.0


def quantize(plane, levels):
    h, w = plane.shape
    out = np.zeros((h, w), dtype=int)
    for y in range(h):
        for x in range(w):
            out[y, x] = min(int(math.floor(plane[y, x] * levels)), levels - 1)
    return out


def cooccurrence(qplane, levels, offsets):
    """Explicit pair enumeration with symmetric accumulation."""
    h, w = qplane.shape
    counts = np.zeros((levels, levels))
    for dy, dx in offsets:
        for y in range(h):
            for x in range(w):
                yy, xx = y + dy, x + dx
                if 0 <= yy < h and 0 <= xx < w:
                    counts[qplane[y, x], qplane[yy, xx]] += 1
                    counts[qplane[yy, xx], qplane[y, x]] += 1
    return counts / counts.sum()


def ccm_stats(ccm):
    levels = ccm.shape[0]
    mu_x = math.fsum(ccm[i, j] * (i + 1) for i in range(levels) for j in range(levels))
    mu_y = math.fsum(ccm[i, j] * (j + 1) for i in range(levels) for j in range(levels))
    cells = [(i, j, ccm[i, j]) for i in range(levels) for j in range(levels)]
    return {
        "mean": mu_x,
        "autoc": math.fsum(p * (i + 1) * (j + 1) for i, j, p in cells),
        "sosvh": math.fsum(p * (i + 1 - mu_x) ** 2 for i, j, p in cells),
        "second_moment": math.fsum(p * p for _, _, p in cells),
        "covariance": math.fsum(p * (i + 1 - mu_x) * (j + 1 - mu_y) for i, j, p in cells),
    }


def channel_stats(plane):
    values = [float(v) for v in plane.ravel()]
    n = len(values)
    mean = math.fsum(values) / n
    variance = math.fsum((v - mean) ** 2 for v in values) / n
    return {
        "mean": mean,
        "std": math.sqrt(variance),
        "variance": variance,
        "second_moment": math.fsum(v * v for v in values) / n,
    }


def guarded_mean(numerators, denominators, epsilon):
    terms = [
        (n / d if abs(d) > epsilon else 0.0)
        for n, d in zip(numerators.ravel(), denominators.ravel())
    ]
    return math.fsum(terms) / len(terms)


def ndvi(nir, red, epsilon=1e-12):
    return guarded_mean(nir - red, nir + red, epsilon)


def evi(nir, red, blue, gain=2.5, c_red=6.0, c_blue=7.5, l_soil=1.0, epsilon=1e-12):
    return gain * guarded_mean(nir - red, nir + c_red * red - c_blue * blue + l_soil, epsilon)


def arvi(nir, red, blue, epsilon=1e-12):
    return guarded_mean(nir - (2.0 * red - blue), nir + (2.0 * red + blue), epsilon)


def simple_ratio(nir, red, epsilon=1e-12):
    terms = [n / (r + epsilon) for n, r in zip(nir.ravel(), red.ravel())]
    return math.fsum(terms) / len(terms)


def dct_matrix(n):
    """Orthonormal DCT-II basis built from the definition."""
    c = np.zeros((n, n))
    for k in range(n):
        scale = math.sqrt(1.0 / n) if k == 0 else math.sqrt(2.0 / n)
        for i in range(n):
            c[k, i] = scale * math.cos(math.pi * k * (2 * i + 1) / (2.0 * n))
    return c


def dct_feature(plane):
    n = plane.shape[0]
    c = dct_matrix(n)
    coeffs = c @ plane @ c.T
    total = math.fsum(abs(v) for v in coeffs.ravel()) - abs(coeffs[0, 0])
    return total / (coeffs.size - 1)


def extract(patch, levels=8, offsets=((0, 1),), epsilon=1e-12):
    """Brute-force 22-feature vector, in the canonical order."""
    hue, sat, inten, nir = hsi_planes(patch)
    red = patch[0].astype(float) / 255.0
    blue = patch[2].astype(float) / 255.0
    h_ccm = ccm_stats(cooccurrence(quantize(hue, levels), levels, offsets))
    s_ccm = ccm_stats(cooccurrence(quantize(sat, levels), levels, offsets))
    i_ccm = ccm_stats(cooccurrence(quantize(inten, levels), levels, offsets))
    h_st = channel_stats(hue)
    s_st = channel_stats(sat)
    i_st = channel_stats(inten)
    n_st = channel_stats(nir)
    return np.array(
        [
            i_ccm["mean"],
            h_ccm["sosvh"],
            h_ccm["autoc"],
            s_ccm["mean"],
            h_ccm["mean"],
            simple_ratio(nir, red, epsilon),
            s_ccm["second_moment"],
            i_ccm["second_moment"],
            i_st["second_moment"],
            i_st["variance"],
            n_st["std"],
            i_st["std"],
            h_st["std"],
            h_st["mean"],
            i_st["mean"],
            s_st["mean"],
            i_ccm["covariance"],
            n_st["mean"],
            arvi(nir, red, blue, epsilon),
            ndvi(nir, red, epsilon),
            dct_feature(inten),
            evi(nir, red, blue, epsilon=epsilon),
        ]
    )


def rbm_joint_table(weights, visible_bias, hidden_bias):
    """Unnormalized Boltzmann weights exp(-E) over all joint binary states."""
    m, n = weights.shape
    table = {}
    for v_bits in itertools.product((0, 1), repeat=m):
        for h_bits in itertools.product((0, 1), repeat=n):
            v = np.array(v_bits, dtype=float)
            h = np.array(h_bits, dtype=float)
            energy = -(visible_bias @ v) - (hidden_bias @ h) - v @ weights @ h
            table[(v_bits, h_bits)] = math.exp(-energy)
    return table


def rbm_conditional_h(weights, visible_bias, hidden_bias, v_bits):
    """P(h_j = 1 | v) by summing the joint table."""
    m, n = weights.shape
    table = rbm_joint_table(weights, visible_bias, hidden_bias)
    total = math.fsum(w for (vb, _), w in table.items() if vb == tuple(v_bits))
    probs = []
    for j in range(n):
        mass = math.fsum(
            w for (vb, hb), w in table.items() if vb == tuple(v_bits) and hb[j] == 1
        )
        probs.append(mass / total)
    return np.array(probs)


def rbm_conditional_v(weights, visible_bias, hidden_bias, h_bits):
    m, n = weights.shape
    table = rbm_joint_table(weights, visible_bias, hidden_bias)
    total = math.fsum(w for (_, hb), w in table.items() if hb == tuple(h_bits))
    probs = []
    for i in range(m):
        mass = math.fsum(
            w for (vb, hb), w in table.items() if hb == tuple(h_bits) and vb[i] == 1
        )
        probs.append(mass / total)
    return np.array(probs)


def rbm_model_expectations(weights, visible_bias, hidden_bias):
    """E_model[v h^T], E_model[v], E_model[h] by exhaustive enumeration."""
    m, n = weights.shape
    table = rbm_joint_table(weights, visible_bias, hidden_bias)
    z = math.fsum(table.values())
    e_vh = np.zeros((m, n))
    e_v = np.zeros(m)
    e_h = np.zeros(n)
    for (v_bits, h_bits), w in table.items():
        p = w / z
        v = np.array(v_bits, dtype=float)
        h = np.array(h_bits, dtype=float)
        e_vh += p * np.outer(v, h)
        e_v += p * v
        e_h += p * h
    return e_vh, e_v, e_h


def rbm_exact_gradient(weights, visible_bias, hidden_bias, data):
    """Gradient of the mean data log-likelihood at the given parameters.

    dL/dW_ij = E_data[v_i p(h_j|v)] - E_model[v_i h_j], and the bias analogues.
    """
    def sigmoid(x):
        return 1.0 / (1.0 + np.exp(-x))

    h_probs = sigmoid(data @ weights + hidden_bias)
    pos_w = data.T @ h_probs / len(data)
    pos_v = data.mean(axis=0)
    pos_h = h_probs.mean(axis=0)
    e_vh, e_v, e_h = rbm_model_expectations(weights, visible_bias, hidden_bias)
    return pos_w - e_vh, pos_v - e_v, pos_h - e_h
