"""Seeded synthetic scenes for the demo trainer.

Each scene is a 64x64 grid with 1-3 axis-aligned rectangles or ellipses
as foreground, a noisy intensity image separating foreground from
background imperfectly, and the per-pixel feature channels the logistic
micro-predictor consumes (intensity, two blur scales, x/y coordinates).
Foreground fraction is kept inside [0.05, 0.6] by re-rolling the shape
layout, so every mask is non-empty and the losses have real work to do.
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

SCENE_SIZE = 64
FEATURE_NAMES = ("intensity", "blur1", "blur3", "x", "y")
FOREGROUND_FRACTION = (0.05, 0.6)


@dataclass
class SynthScene:
    scene_id: str
    image: np.ndarray     # (H, W) intensity in [0, 1]
    gt: np.ndarray        # (H, W) binary mask
    features: np.ndarray  # (5, H, W) channels per FEATURE_NAMES


def _draw_shapes(rng, size):
    gt = np.zeros((size, size), dtype=np.float64)
    yy, xx = np.mgrid[0:size, 0:size]
    for _ in range(int(rng.integers(1, 4))):
        kind = int(rng.integers(0, 2))
        half_h = int(rng.integers(size // 10, size // 4 + 1))
        half_w = int(rng.integers(size // 10, size // 4 + 1))
        cy = int(rng.integers(half_h, size - half_h))
        cx = int(rng.integers(half_w, size - half_w))
        if kind == 0:
            gt[cy - half_h:cy + half_h + 1, cx - half_w:cx + half_w + 1] = 1.0
        else:
            inside = (((yy - cy) / half_h) ** 2
                      + ((xx - cx) / half_w) ** 2) <= 1.0
            gt[inside] = 1.0
    return gt


def synth_scene(rng, size=SCENE_SIZE, scene_id=""):
    lo, hi = FOREGROUND_FRACTION
    for _ in range(200):
        gt = _draw_shapes(rng, size)
        if lo <= gt.mean() <= hi:
            break
    else:  # parameter ranges make this unreachable in practice
        raise RuntimeError("could not draw a scene with foreground "
                           "fraction in [%g, %g]" % (lo, hi))
    fg_level = rng.uniform(0.6, 0.85)
    bg_level = rng.uniform(0.15, 0.4)
    image = np.where(gt == 1.0, fg_level, bg_level)
    image = image + rng.normal(0.0, 0.08, size=image.shape)
    image = np.clip(image, 0.0, 1.0)
    yy, xx = np.mgrid[0:size, 0:size]
    features = np.stack([
        image,
        gaussian_filter(image, sigma=1.0),
        gaussian_filter(image, sigma=3.0),
        xx / (size - 1.0),
        yy / (size - 1.0),
    ])
    return SynthScene(scene_id=scene_id, image=image, gt=gt,
                      features=features)


def synth_dataset(n, seed, size=SCENE_SIZE):
    """n seeded scenes; the same (n, seed, size) always reproduces the
    same dataset bit for bit."""
    if n < 1:
        raise ValueError("n must be >= 1, got %r" % n)
    rng = np.random.default_rng(seed)
    return [synth_scene(rng, size=size, scene_id="scene-%04d" % i)
            for i in range(n)]
