"""Image file I/O.  Internal representation is always float64 in [0, 1];
files are PNG or binary PGM/PPM via Pillow."""

import numpy as np
from PIL import Image


def load_image(path):
    """Load an RGB image as an H x W x 3 float array in [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def load_image_gray(path):
    """Load an 8-bit grayscale map as H x W floats in [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"), dtype=np.float64)
    return arr / 255.0


def load_mask(path):
    """Load an 8-bit mask; foreground is any value above 127."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return arr > 127


def save_image(path, image):
    """Save an H x W x 3 float image in [0, 1]."""
    data = np.clip(np.rint(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path)


def save_map(path, s):
    """Save a saliency map as 8-bit grayscale: value = round(255 * s)."""
    data = np.clip(np.rint(np.asarray(s) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path)


def save_mask(path, mask):
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(path)


def save_labels(path, labels):
    """Debug output: a superpixel label map as 16-bit grayscale PNG."""
    Image.fromarray(np.asarray(labels, dtype=np.uint16)).save(path)
