"""Routing-weight and guidance-map dumps for inspecting a trained model."""
from __future__ import annotations

import csv
from itertools import product
from pathlib import Path

import numpy as np

from ..data.imageio import write_pgm
from ..data.sampling import SYMMETRIC_SCALES
from ..scale import ScalePair, resolve_size

ROUTING_FIELDS = ("r_h", "r_v", "bank", "expert", "weight")


def default_scale_grid():
    """All 30 x 30 (r_h, r_v) pairs over the 0.1-stride grid 1.1..4.0."""
    return [ScalePair(h, v) for h, v in product(SYMMETRIC_SCALES, SYMMETRIC_SCALES)]


def routing_rows(model, scales=None):
    """Rows ``(r_h, r_v, bank, expert, weight)``; bank ``j`` is adaption block ``j``."""
    rows = []
    for s in scales if scales is not None else default_scale_grid():
        s = ScalePair.of(s)
        for bank, weights in enumerate(model.routing_weights(s)):
            for expert, wt in enumerate(np.asarray(weights, dtype=np.float64)):
                rows.append((s.r_h, s.r_v, bank, expert, float(wt)))
    return rows


def dump_routing(model, path, scales=None):
    """Write routing weights for every scale in ``scales`` to a CSV file."""
    rows = routing_rows(model, scales)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ROUTING_FIELDS)
        for r_h, r_v, bank, expert, wt in rows:
            writer.writerow((f"{r_h:g}", f"{r_v:g}", bank, expert, repr(wt)))
    return rows


def guidance_maps(model, image, scale=None, size=None):
    """Guidance maps (H, W) in (0, 1), one per adaption block with guidance."""
    x = np.asarray(image, dtype=model.dtype)
    if x.ndim == 3:
        x = x[None]
    scale, out_hw = resolve_size(x.shape[2:], scale=scale, size=size)
    _, cache = model.forward(x[:1], scale, out_hw)
    return [np.asarray(m[0, 0], dtype=np.float64) for m in cache["guidance"] if m is not None]


def guidance_to_u8(m) -> np.ndarray:
    return np.clip(np.floor(255.0 * np.asarray(m, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


def dump_guidance(model, image, scale, out_dir, prefix: str = "guidance"):
    """Write each guidance map as an 8-bit PGM ``round(255 * M)``; return the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for j, m in enumerate(guidance_maps(model, image, scale)):
        p = out_dir / f"{prefix}_{j}.pgm"
        write_pgm(p, guidance_to_u8(m))
        paths.append(p)
    return paths
