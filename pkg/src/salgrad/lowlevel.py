"""Low-level color saliency cues and the refinement product.

Per-superpixel global color contrast in LAB space, a neighbor-smoothed
version of it, a spatial-compactness color distribution cue, and their
combination into a low-level map scaled to [alpha, 1 + alpha].  The final
refined saliency is the elementwise product of that map with the smoothed
network-derived map.
"""

from dataclasses import dataclass

import numpy as np

from .color import rgb_to_lab

__all__ = [
    "rgb_to_lab",
    "SuperpixelColorStats",
    "superpixel_stats",
    "global_contrast",
    "contrast_smooth",
    "color_distribution",
    "build_lowlevel",
    "refine",
]


@dataclass
class SuperpixelColorStats:
    """Per-superpixel mean LAB color, mean pixel position, and size."""

    colors: np.ndarray  # (K, 3) mean LAB
    positions: np.ndarray  # (K, 2) mean (y, x)
    counts: np.ndarray  # (K,)
    image_shape: tuple


def superpixel_stats(lab, sp):
    """Aggregate mean color and position for every superpixel."""
    if lab.shape[:2] != sp.labels.shape:
        raise ValueError("LAB image and superpixel map shapes differ")
    h, w = sp.labels.shape
    flat = sp.labels.ravel()
    counts = np.bincount(flat, minlength=sp.k).astype(np.float64)
    colors = np.stack(
        [
            np.bincount(flat, weights=lab[..., c].ravel(), minlength=sp.k)
            for c in range(3)
        ],
        axis=1,
    ) / counts[:, None]
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    positions = np.stack(
        [
            np.bincount(flat, weights=yy.ravel().astype(np.float64), minlength=sp.k),
            np.bincount(flat, weights=xx.ravel().astype(np.float64), minlength=sp.k),
        ],
        axis=1,
    ) / counts[:, None]
    return SuperpixelColorStats(colors, positions, counts, (h, w))


def global_contrast(stats):
    """Per-superpixel sum of squared LAB distances to all superpixels."""
    c = stats.colors
    k = len(c)
    if k < 1:
        raise ValueError("need at least one superpixel")
    # deliberately the plain double loop in natural order: K is ~100 in
    # practice and this keeps the arithmetic order deterministic
    gc = np.zeros(k)
    for i in range(k):
        total = 0.0
        li, ai, bi = c[i]
        for j in range(k):
            lj, aj, bj = c[j]
            total += (li - lj) ** 2 + (ai - aj) ** 2 + (bi - bj) ** 2
        gc[i] = total
    return gc


def _color_affinity(colors, sigma_color):
    d2 = ((colors[:, None, :] - colors[None, :, :]) ** 2).sum(axis=2)
    if sigma_color <= 0:
        # identity limit: all weight on self
        return np.eye(len(colors))
    return np.exp(-d2 / (2.0 * sigma_color**2))


def contrast_smooth(gc, stats, sigma_color=10.0, m_neighbors=10):
    """Color-similarity-weighted average of the contrast values over each
    superpixel's m nearest neighbors in LAB space (self included)."""
    gc = np.asarray(gc, dtype=np.float64)
    k = len(gc)
    if k != len(stats.colors):
        raise ValueError("contrast vector and stats are misaligned")
    weights = _color_affinity(stats.colors, sigma_color)
    m = min(m_neighbors, k)
    d2 = ((stats.colors[:, None, :] - stats.colors[None, :, :]) ** 2).sum(axis=2)
    out = np.empty(k)
    for i in range(k):
        near = np.argsort(d2[i], kind="stable")[:m]
        w = weights[i, near]
        total = w.sum()
        if total <= 0:
            out[i] = gc[i]
        else:
            out[i] = (w * gc[near]).sum() / total
    return out


def color_distribution(stats, sigma_color=10.0, sigma_dist_frac=0.25):
    """Spatial-compactness cue: color-similarity-weighted variance of
    superpixel positions, turned into saliency with a Gaussian falloff.
    Compact color clusters score near 1, scattered ones near 0."""
    k = len(stats.colors)
    weights = _color_affinity(stats.colors, sigma_color)
    weights = weights / weights.sum(axis=1, keepdims=True)
    mean_pos = weights @ stats.positions
    d2 = ((stats.positions[None, :, :] - mean_pos[:, None, :]) ** 2).sum(axis=2)
    variance = (weights * d2).sum(axis=1)
    h, w = stats.image_shape
    sigma_d = sigma_dist_frac * np.hypot(h, w)
    return np.exp(-variance / sigma_d**2)


def _minmax(v):
    lo, hi = v.min(), v.max()
    if hi - lo <= 0:
        return np.ones_like(v)
    return (v - lo) / (hi - lo)


def build_lowlevel(gc_smoothed, dist_cue, alpha, sp):
    """Combine the contrast and distribution cues into a per-pixel map in
    [alpha, 1 + alpha].  Constant features degenerate to 1 + alpha
    everywhere, so refinement becomes a mild uniform boost."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    gc_smoothed = np.asarray(gc_smoothed, dtype=np.float64)
    dist_cue = np.asarray(dist_cue, dtype=np.float64)
    if gc_smoothed.shape != dist_cue.shape:
        raise ValueError("cue vectors are misaligned")
    feature = _minmax(gc_smoothed) * _minmax(dist_cue)
    feature = _minmax(feature)
    return alpha + feature[sp.labels]


def lowlevel_map(image, sp, alpha=0.3, sigma_color=10.0, sigma_dist_frac=0.25):
    """Full low-level stage: LAB stats -> contrast -> smoothing ->
    distribution cue -> [alpha, 1 + alpha] pixel map."""
    lab = rgb_to_lab(image)
    stats = superpixel_stats(lab, sp)
    gc = global_contrast(stats)
    gcs = contrast_smooth(gc, stats, sigma_color=sigma_color)
    dist = color_distribution(stats, sigma_color=sigma_color, sigma_dist_frac=sigma_dist_frac)
    return build_lowlevel(gcs, dist, alpha, sp)


def refine(s_bar, s_l, theta=0.0):
    """Elementwise product of the smoothed map and the low-level map,
    pruned by ``theta`` and max-normalized back to [0, 1]."""
    s_bar = np.asarray(s_bar, dtype=np.float64)
    s_l = np.asarray(s_l, dtype=np.float64)
    if s_bar.shape != s_l.shape:
        raise ValueError(f"shape mismatch: {s_bar.shape} vs {s_l.shape}")
    s = np.maximum(s_bar * s_l - theta, 0.0)
    peak = s.max()
    if peak > 0:
        s = s / peak
    return s
