"""sRGB to CIELAB conversion (D65, 2 degree observer)."""

import numpy as np

# D65 reference white
_XN, _YN, _ZN = 95.047, 100.0, 108.883

_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)


def rgb_to_lab(image):
    """Convert an sRGB image with values in [0, 1] to CIELAB.

    Returns an array of the same H x W x 3 shape with L in [0, 100] and
    a/b roughly in [-128, 127].  Raises ValueError for out-of-range or
    malformed input.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an H x W x 3 image, got shape {image.shape}")
    if not np.all(np.isfinite(image)):
        raise ValueError("image contains non-finite values")
    if image.min() < 0.0 or image.max() > 1.0:
        raise ValueError("RGB values must lie in [0, 1]")

    # sRGB transfer function: linearize
    linear = np.where(
        image > 0.04045,
        ((image + 0.055) / 1.055) ** 2.4,
        image / 12.92,
    )
    xyz = 100.0 * (linear @ _RGB_TO_XYZ.T)

    scaled = xyz / np.array([_XN, _YN, _ZN])
    f = np.where(
        scaled > 0.008856,
        np.cbrt(scaled),
        7.787 * scaled + 16.0 / 116.0,
    )
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]

    lab = np.empty_like(image)
    lab[..., 0] = 116.0 * fy - 16.0
    lab[..., 1] = 500.0 * (fx - fy)
    lab[..., 2] = 200.0 * (fy - fz)
    return lab
