"""Procedural test images: flat shapes, stripes and soft gradients.

Shapes are rendered on a supersampled grid and box-averaged, so edges are
anti-aliased the way a camera's optics band-limit a real photograph.
"""
from __future__ import annotations

import numpy as np


def synthetic_image(rng: np.random.Generator, height: int = 96, width: int = 96,
                    n_shapes: int = 12, supersample: int = 4) -> np.ndarray:
    """Return a (3, H, W) float image in [0, 1] with crisp, anti-aliased edges."""
    ss = int(supersample)
    if ss < 1:
        raise ValueError(f"supersample must be >= 1, got {supersample}")
    # sub-pixel centres in output pixel units
    ys = (np.arange(height * ss) + 0.5) / ss - 0.5
    xs = (np.arange(width * ss) + 0.5) / ss - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    base = rng.uniform(0.2, 0.8, size=3)
    gx, gy = rng.uniform(-0.3, 0.3, size=2)
    img = base[:, None, None] + (gx * xx / width + gy * yy / height)[None]
    for _ in range(n_shapes):
        color = rng.uniform(0.0, 1.0, size=3)[:, None]
        kind = rng.integers(4)
        cx, cy = rng.uniform(0, width), rng.uniform(0, height)
        if kind == 0:
            rx, ry = rng.uniform(4, width / 3), rng.uniform(4, height / 3)
            mask = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1
        elif kind == 1:
            hw, hh = rng.uniform(3, width / 4), rng.uniform(3, height / 4)
            mask = (np.abs(xx - cx) <= hw) & (np.abs(yy - cy) <= hh)
        elif kind == 2:
            theta = rng.uniform(0, np.pi)
            period = rng.uniform(3, 10)
            d = (xx - cx) * np.cos(theta) + (yy - cy) * np.sin(theta)
            band = (np.abs(xx - cx) < width / 4) & (np.abs(yy - cy) < height / 4)
            mask = band & (np.mod(d, period) < period / 2)
        else:
            theta = rng.uniform(0, np.pi)
            d = (xx - cx) * np.sin(theta) - (yy - cy) * np.cos(theta)
            mask = np.abs(d) <= rng.uniform(0.6, 2.5)
        img[:, mask] = color
    img = img.reshape(3, height, ss, width, ss).mean(axis=(2, 4))
    return np.clip(img, 0.0, 1.0)


def synthetic_corpus(n: int, seed: int = 0, height: int = 96, width: int = 96,
                     dtype=np.float32) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [synthetic_image(rng, height, width).astype(dtype) for _ in range(n)]
