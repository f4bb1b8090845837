"""Shared test fixtures and generators."""

import numpy as np
import pytest
from PIL import Image


def write_png(path, arr):
    """8-bit single-channel PNG from a [0,1] array."""
    data = np.rint(np.asarray(arr, dtype=np.float64) * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path, format="PNG")


def block_mask(size, r0, r1, c0, c1):
    m = np.zeros((size, size), dtype=np.float64)
    m[r0:r1, c0:c1] = 1.0
    return m


def random_pair(rng, size=16):
    """Random (pred, gt): half the preds byte-quantized, half continuous."""
    if rng.random() < 0.5:
        pred = rng.integers(0, 256, size=(size, size)) / 255.0
    else:
        pred = rng.random((size, size))
    density = rng.uniform(0.2, 0.8)
    gt = (rng.random((size, size)) < density).astype(np.float64)
    return pred, gt


def edge_case_pairs(size=16):
    """Hand-built degenerate and extreme (pred, gt) pairs."""
    rng = np.random.default_rng(12345)
    noise = rng.random((size, size))
    half = block_mask(size, 0, size, 0, size // 2)
    centered = block_mask(size, size // 4, 3 * size // 4,
                          size // 4, 3 * size // 4)
    single = np.zeros((size, size))
    single[size // 2, size // 2] = 1.0
    near_single = np.clip(single * 0.9 + 0.02, 0.0, 1.0)
    zeros = np.zeros((size, size))
    ones = np.ones((size, size))
    return [
        (noise, zeros),                 # empty GT, noisy prediction
        (zeros, zeros),                 # empty GT, empty prediction
        (noise, ones),                  # full GT, noisy prediction
        (ones, ones),                   # full GT, full prediction
        (centered.copy(), centered),    # exact match
        (1.0 - centered, centered),     # inverted prediction
        (zeros, half),                  # blind prediction
        (ones, half),                   # all-positive prediction
        (np.full((size, size), 0.5), centered),  # uninformative prediction
        (near_single, single),          # single-pixel object
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(0)
