"""Synthetic labeled images with exact foreground masks.

Each sample is a noise-textured background with one to three bright
geometric objects of a single class; the mask covers exactly the drawn
object pixels.  Small enough to train the desk-scale classifier to
near-perfect accuracy, which the saliency method assumes.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

SHAPE_CLASSES = ("circle", "triangle", "rectangle", "cross")


@dataclass
class SyntheticSample:
    image: np.ndarray  # (size, size, 3) float in [0, 1]
    label: int
    mask: np.ndarray  # (size, size) bool


def _noise_background(size, rng):
    """Smooth value-noise texture, kept dark so objects stand out."""
    grid = max(4, size // 8)
    coarse = rng.uniform(0.05, 0.40, (grid, grid))
    zoom = size / grid
    base = ndimage.zoom(coarse, zoom, order=1, mode="nearest", grid_mode=True)
    base = base[:size, :size]
    tint = rng.uniform(0.8, 1.2, 3)
    bg = np.clip(base[..., None] * tint, 0.0, 0.5)
    return bg


def _shape_mask(kind, size, rng, scale):
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    r = rng.uniform(0.12, 0.24) * size * scale
    r = max(r, 4.0)
    cy = rng.uniform(r + 1, size - r - 1)
    cx = rng.uniform(r + 1, size - r - 1)

    if kind == "circle":
        return (yy - cy) ** 2 + (xx - cx) ** 2 <= r**2
    if kind == "rectangle":
        hy = r * rng.uniform(0.6, 1.0)
        hx = r * rng.uniform(0.6, 1.0)
        return (np.abs(yy - cy) <= hy) & (np.abs(xx - cx) <= hx)
    if kind == "triangle":
        # upward isoceles triangle inscribed in the radius
        top = cy - r
        half_width = (yy - top) * (r / (2.0 * r))
        return (yy >= top) & (yy <= cy + r) & (np.abs(xx - cx) <= half_width)
    if kind == "cross":
        t = max(2.0, r / 3.0)
        arm_v = (np.abs(xx - cx) <= t) & (np.abs(yy - cy) <= r)
        arm_h = (np.abs(yy - cy) <= t) & (np.abs(xx - cx) <= r)
        return arm_v | arm_h
    raise ValueError(f"unknown shape class {kind!r}")


def render_sample(class_index, class_name, size, rng):
    image = _noise_background(size, rng)
    n_objects = int(rng.integers(1, 4))
    scale = 1.0 / np.sqrt(n_objects)
    mask = np.zeros((size, size), dtype=bool)
    for _ in range(n_objects):
        mask |= _shape_mask(class_name, size, rng, scale)
    color = rng.uniform(0.65, 1.0, 3)
    color = color / color.max() * rng.uniform(0.88, 1.0)
    image[mask] = color
    return SyntheticSample(image=image, label=class_index, mask=mask)


def generate_dataset(n, classes=SHAPE_CLASSES, size=64, seed=0):
    """Deterministic balanced dataset of ``n`` samples.

    Labels cycle through the classes so per-class counts differ by at
    most one.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if size < 32:
        raise ValueError(f"size must be >= 32, got {size}")
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        label = i % len(classes)
        samples.append(render_sample(label, classes[label], size, rng))
    return samples
