"""HR -> LR coordinate projection for the scale-aware upsampler."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def project(coords, r):
    """Project HR pixel indices onto LR space.

    Returns ``(L, R)`` with ``L = (x + 0.5) / r - 0.5`` the continuous LR
    coordinate and ``R = L - floor((x + 0.5) / r)`` the signed distance to
    the LR pixel the HR pixel falls into, in ``[-0.5, 0.5)``.
    """
    x = np.asarray(coords, dtype=np.float64)
    t = (x + 0.5) / r
    return t - 0.5, t - 0.5 - np.floor(t)


@dataclass(frozen=True)
class SamplingGrid:
    """Separable projected coordinates for an ``H_out x W_out`` output.

    ``lx``/``rx`` are indexed by output column, ``ly``/``ry`` by output row.
    """

    lx: np.ndarray
    rx: np.ndarray
    ly: np.ndarray
    ry: np.ndarray
    r_h: float
    r_v: float

    @property
    def shape(self):
        return len(self.ly), len(self.lx)

    def base_index(self):
        """Integer LR pixel each output column/row falls into, ``floor((x + 0.5) / r)``."""
        return (np.rint(self.lx - self.rx).astype(np.int64),
                np.rint(self.ly - self.ry).astype(np.int64))


def build_grid(h_lr: int, w_lr: int, h_out: int, w_out: int) -> SamplingGrid:
    """Grid for resampling ``h_lr x w_lr`` features to ``h_out x w_out``.

    The scale on each axis is the exact size ratio, so any requested output
    size is honoured.
    """
    for name, v in (("h_lr", h_lr), ("w_lr", w_lr), ("h_out", h_out), ("w_out", w_out)):
        if int(v) < 1:
            raise ValueError(f"{name} must be positive, got {v}")
    r_h = w_out / w_lr
    r_v = h_out / h_lr
    lx, rx = project(np.arange(w_out), r_h)
    ly, ry = project(np.arange(h_out), r_v)
    return SamplingGrid(lx, rx, ly, ry, r_h, r_v)
