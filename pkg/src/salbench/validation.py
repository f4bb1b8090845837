"""Input checking helpers shared by the metric and loss functions.

All public entry points normalise their inputs through these checks so
that error messages stay consistent across the package.
"""

import numpy as np


def check_saliency_map(arr, name="prediction"):
    """Coerce to a float64 2-D array with values in [0, 1].

    Raises ValueError for wrong dimensionality, non-finite entries or
    out-of-range values.
    """
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(
            "%s must be a 2-D array, got %d dimension(s)" % (name, out.ndim))
    if out.size == 0:
        raise ValueError("%s must not be empty" % name)
    if not np.isfinite(out).all():
        raise ValueError("%s contains non-finite values" % name)
    if out.min() < 0.0 or out.max() > 1.0:
        raise ValueError(
            "%s values must lie in [0, 1], got range [%g, %g]"
            % (name, out.min(), out.max()))
    return out


def check_binary_mask(arr, name="ground truth"):
    """Coerce to float64 and verify every value is exactly 0 or 1."""
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(
            "%s must be a 2-D array, got %d dimension(s)" % (name, out.ndim))
    if out.size == 0:
        raise ValueError("%s must not be empty" % name)
    bad = (out != 0.0) & (out != 1.0)
    if bad.any():
        raise ValueError(
            "%s must be binary (only 0 and 1 allowed), found value %r"
            % (name, float(out[bad][0])))
    return out


def check_same_shape(pred, gt):
    if pred.shape != gt.shape:
        raise ValueError(
            "shape mismatch: prediction %s vs ground truth %s"
            % (pred.shape, gt.shape))


def check_pair(pred, gt):
    """Validate a (saliency map, binary mask) pair, returning float64 copies."""
    p = check_saliency_map(pred, "prediction")
    g = check_binary_mask(gt, "ground truth")
    check_same_shape(p, g)
    return p, g


def check_threshold(t):
    t = float(t)
    if not np.isfinite(t) or t < 0.0 or t > 1.0:
        raise ValueError("threshold must lie in [0, 1], got %r" % t)
    return t
