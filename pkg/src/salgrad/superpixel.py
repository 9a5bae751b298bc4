"""SLIC superpixels and per-superpixel saliency smoothing.

The segmentation is a localized k-means in (L, a, b, x, y) space with a
compactness weight, seeded on a regular grid, followed by a connectivity
pass that merges small fragments into their largest neighbor.  After the
pass every label is a single 4-connected region.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .color import rgb_to_lab


@dataclass
class SuperpixelMap:
    """Label image plus per-label pixel counts; labels are 0..k-1."""

    labels: np.ndarray
    counts: np.ndarray
    k: int

    def validate(self):
        h, w = self.labels.shape
        if self.labels.min() < 0 or self.labels.max() >= self.k:
            raise ValueError("labels outside [0, k)")
        counts = np.bincount(self.labels.ravel(), minlength=self.k)
        if not np.array_equal(counts, self.counts):
            raise ValueError("stored counts do not match label map")
        if counts.min() < 1:
            raise ValueError("empty superpixel label")
        if counts.sum() != h * w:
            raise ValueError("counts do not sum to the pixel count")


def _seed_grid(h, w, k_target):
    """Regular seed grid with roughly k_target cells, wider than tall for
    landscape images (and on square ties, so left/right structure splits)."""
    nx = max(1, math.ceil(math.sqrt(k_target * w / h)))
    ny = max(1, math.ceil(k_target / nx))
    # retighten so tiny targets don't over-seed (e.g. k=1 must stay 1 cell)
    nx = max(1, math.ceil(k_target / ny))
    # pixel centers sit at integer coordinates 0..h-1, hence the -0.5
    ys = (np.arange(ny) + 0.5) * h / ny - 0.5
    xs = (np.arange(nx) + 0.5) * w / nx - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return np.stack([yy.ravel(), xx.ravel()], axis=1)


def _enforce_connectivity(labels, min_size):
    """Split every label into its 4-connected components, merge components
    smaller than ``min_size`` into their largest 4-neighbor, and relabel
    in row-major first-occurrence order."""
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    comp = np.full(labels.shape, -1, dtype=np.int64)
    n_comp = 0
    for value in np.unique(labels):
        mask = labels == value
        part, n = ndimage.label(mask, structure=structure)
        comp[mask] = part[mask] - 1 + n_comp
        n_comp += n

    sizes = np.bincount(comp.ravel(), minlength=n_comp)
    for cid in np.argsort(sizes, kind="stable"):
        if sizes[cid] >= min_size or sizes[cid] == 0:
            continue
        mask = comp == cid
        border = ndimage.binary_dilation(mask, structure=structure) & ~mask
        neighbors = np.unique(comp[border])
        if len(neighbors) == 0:
            continue  # single-component image
        target = neighbors[np.argmax(sizes[neighbors])]
        comp[mask] = target
        sizes[target] += sizes[cid]
        sizes[cid] = 0

    # compact to 0..k-1 in order of first appearance
    flat = comp.ravel()
    _, first = np.unique(flat, return_index=True)
    order = flat[np.sort(first)]
    remap = np.full(n_comp, -1, dtype=np.int64)
    remap[order] = np.arange(len(order))
    return remap[comp]


def slic(image, k_target, compactness=10.0, max_iters=10):
    """Segment an RGB image (values in [0, 1]) into about ``k_target``
    superpixels.  Returns a :class:`SuperpixelMap`; the realized count may
    differ slightly after the connectivity pass."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3 or image.size == 0:
        raise ValueError(f"expected a nonempty H x W x 3 image, got {image.shape}")
    h, w = image.shape[:2]
    if not 1 <= k_target <= h * w:
        raise ValueError(f"k_target must be in [1, {h * w}], got {k_target}")

    lab = rgb_to_lab(image)
    step = math.sqrt(h * w / k_target)
    seeds = _seed_grid(h, w, k_target)
    n_seeds = len(seeds)

    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    features = np.concatenate(
        [lab.reshape(-1, 3), yy.reshape(-1, 1), xx.reshape(-1, 1)], axis=1
    )
    spatial_weight = (compactness / step) ** 2

    centroids = np.empty((n_seeds, 5))
    seed_idx = (
        np.clip(seeds[:, 0].astype(int), 0, h - 1) * w
        + np.clip(seeds[:, 1].astype(int), 0, w - 1)
    )
    centroids[:, :3] = features[seed_idx, :3]
    centroids[:, 3:] = seeds

    labels = np.zeros(h * w, dtype=np.int64)
    for _ in range(max_iters):
        d_lab = (
            (features[:, None, :3] - centroids[None, :, :3]) ** 2
        ).sum(axis=2)
        d_xy = (
            (features[:, None, 3:] - centroids[None, :, 3:]) ** 2
        ).sum(axis=2)
        new_labels = np.argmin(d_lab + spatial_weight * d_xy, axis=1)
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
        counts = np.bincount(labels, minlength=n_seeds)
        occupied = counts > 0
        sums = np.zeros((n_seeds, 5))
        for dim in range(5):
            sums[:, dim] = np.bincount(labels, weights=features[:, dim], minlength=n_seeds)
        centroids[occupied] = sums[occupied] / counts[occupied, None]

    labels = labels.reshape(h, w)
    labels = _enforce_connectivity(labels, min_size=max(1, int(step * step / 4)))
    k = int(labels.max()) + 1
    sp = SuperpixelMap(labels=labels, counts=np.bincount(labels.ravel(), minlength=k), k=k)
    sp.validate()
    return sp


def smooth(s, sp):
    """Replace every pixel by the mean saliency of its superpixel."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape != sp.labels.shape:
        raise ValueError(f"map shape {s.shape} does not match labels {sp.labels.shape}")
    counts = np.bincount(sp.labels.ravel(), minlength=sp.k)
    if counts.min() < 1:
        raise ValueError("superpixel map has an empty label")
    flat_labels = sp.labels.ravel()
    flat = s.ravel()
    sums = np.bincount(flat_labels, weights=flat, minlength=sp.k)
    means = sums / counts
    # constant regions keep their exact value, which also makes repeated
    # smoothing bit-stable
    mins = np.full(sp.k, np.inf)
    maxs = np.full(sp.k, -np.inf)
    np.minimum.at(mins, flat_labels, flat)
    np.maximum.at(maxs, flat_labels, flat)
    means = np.where(mins == maxs, mins, means)
    return means[sp.labels]
