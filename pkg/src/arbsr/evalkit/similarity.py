"""Cross-scale feature similarity of scale-specific networks.

For three networks trained at different scales, the per-pixel similarity
of block ``i`` is the mean of the three pairwise cosine similarities of
their feature vectors at that pixel.  High values mean the block computes
nearly the same thing regardless of scale.
"""
from __future__ import annotations

import numpy as np

from ..data.bicubic import bicubic_resize
from ..scale import ScalePair, round_half_up

_TINY = 1e-30


def whiten(features):
    """Remove the per-channel spatial mean of a (C, H, W) feature map."""
    f = np.asarray(features, dtype=np.float64)
    return f - f.mean(axis=(-2, -1), keepdims=True)


def cosine_map(a, b):
    """Per-pixel cosine similarity of two (C, H, W) maps; 0 where either vector is zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"feature shapes differ: {a.shape} vs {b.shape}")
    dot = np.sum(a * b, axis=0)
    norm = np.sqrt(np.sum(a * a, axis=0)) * np.sqrt(np.sum(b * b, axis=0))
    return np.where(norm > _TINY, dot / np.maximum(norm, _TINY), 0.0)


def similarity_map(f1, f2, f3, whitened: bool = False) -> np.ndarray:
    """Mean pairwise cosine similarity of three (C, H, W) feature maps.

    With ``whitened`` each map first has its per-channel mean removed.
    The result is (H, W) with values in [-1, 1].
    """
    fs = [whiten(f) if whitened else np.asarray(f, dtype=np.float64) for f in (f1, f2, f3)]
    s = (cosine_map(fs[0], fs[1]) + cosine_map(fs[0], fs[2]) + cosine_map(fs[1], fs[2])) / 3.0
    return np.clip(s, -1.0, 1.0)


def _check_same_architecture(models):
    ref = models[0].config.to_dict()
    for k, m in enumerate(models[1:], start=1):
        cfg = m.config.to_dict()
        diff = [f"{key}={ref[key]!r} vs {cfg[key]!r}" for key in ref if ref[key] != cfg[key]
                and key != "head_init"]
        if diff:
            raise ValueError(f"model {k} architecture differs from model 0: " + ", ".join(diff))


def feature_similarity(models, image, scales=(2, 3, 4), factor: int = 4):
    """Similarity map per residual block for three scale-specific models.

    ``image`` is an HR (3, H, W) array in [0, 1]; it is bicubic-downsampled
    by ``factor`` and the common input is fed to every model at its own
    scale.  Returns a list of (h, w) maps, one per residual block.
    """
    models = list(models)
    if len(models) != 3 or len(scales) != 3:
        raise ValueError("feature_similarity needs exactly three models and three scales")
    _check_same_architecture(models)
    image = np.asarray(image)
    h, w = image.shape[-2:]
    small = bicubic_resize(image, max(1, round_half_up(h / factor)), max(1, round_half_up(w / factor)))
    feats = []
    for model, s in zip(models, scales):
        s = ScalePair.of(s)
        x = np.asarray(small, dtype=model.dtype)[None]
        out_hw = (round_half_up(s.r_v * x.shape[2]), round_half_up(s.r_h * x.shape[3]))
        _, cache = model.forward(x, s, out_hw)
        feats.append([f[0] for f in cache["features"]])
    return [similarity_map(*per_block, whitened=True) for per_block in zip(*feats)]

