"""Mask and saliency-map primitives: PNG I/O, binarisation, contour extraction.

Maps are exchanged on disk as single-channel 8-bit PNG files.  In memory a
saliency map is a float64 array in [0, 1] and a ground-truth mask is a
float64 array whose entries are exactly 0 or 1.
"""

import numpy as np
from PIL import Image
from scipy.ndimage import maximum_filter

from .validation import check_binary_mask, check_saliency_map, check_threshold

# default cut for turning grayscale annotations into {0,1} masks
BINARIZE_THRESHOLD = 0.5


def load_saliency_map(path):
    """Read a single-channel 8-bit PNG and scale byte values to [0, 1].

    Other channel layouts or bit depths are rejected rather than silently
    converted, since a wrong colour mode usually means the wrong file.
    """
    with Image.open(path) as im:
        if im.mode in ("RGB", "RGBA", "P", "CMYK", "LA"):
            raise ValueError(
                "unsupported channel count for %s (mode %s), expected a "
                "single-channel 8-bit image" % (path, im.mode))
        if im.mode != "L":
            raise ValueError(
                "unsupported bit depth for %s (mode %s), expected a "
                "single-channel 8-bit image" % (path, im.mode))
        arr = np.asarray(im, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError("degenerate image %s with shape %s" % (path, arr.shape))
    return arr / 255.0


def load_binary_mask(path, threshold=BINARIZE_THRESHOLD):
    """Read a PNG annotation and binarise it at `threshold`."""
    return binarize(load_saliency_map(path), threshold)


def save_saliency_map(arr, path):
    """Write a [0,1] map as a single-channel 8-bit PNG (values rounded)."""
    arr = check_saliency_map(arr, "saliency map")
    bytes_ = np.rint(arr * 255.0).astype(np.uint8)
    Image.fromarray(bytes_, mode="L").save(path, format="PNG")


def binarize(arr, threshold=BINARIZE_THRESHOLD):
    """Strictly-greater-than cut; values equal to the threshold map to 0."""
    arr = check_saliency_map(arr, "saliency map")
    threshold = check_threshold(threshold)
    return (arr > threshold).astype(np.float64)


def extract_contour(mask):
    """Boundary response of a mask via opposing 3x3 dilations.

    Computes maxpool3(m) * maxpool3(1 - m) where maxpool3 is a 3x3 sliding
    maximum with 1x1 stride; at the borders the window is clipped to the
    image, which is what the replicated-edge mode of `maximum_filter`
    evaluates to.  For a binary mask the result is 1 exactly on pixels
    whose 3x3 neighbourhood contains both classes, so the operator is
    invariant under complementing the mask.  Soft inputs are allowed and
    produce a soft response.
    """
    m = check_saliency_map(mask, "mask")
    hi = maximum_filter(m, size=3, mode="nearest")
    lo = maximum_filter(1.0 - m, size=3, mode="nearest")
    return hi * lo
