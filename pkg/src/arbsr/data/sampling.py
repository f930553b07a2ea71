"""Scale grids, patch sampling and training batches."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..scale import ScalePair, round_half_up
from .bicubic import bicubic_resize

log = logging.getLogger(__name__)

# 1.1, 1.2, ..., 4.0
SYMMETRIC_SCALES = tuple(round(0.1 * i, 1) for i in range(11, 41))
_ASYM_AXIS = (1.5, 2.0, 2.5, 3.0, 3.5, 4.0)
ASYMMETRIC_SCALES = tuple((h, v) for h in _ASYM_AXIS for v in _ASYM_AXIS if h != v)
INTEGER_SCALES = (2.0, 3.0, 4.0)

MODES = ("symmetric", "asymmetric", "mixed", "integer")


def sample_scale(rng: np.random.Generator, mode: str = "mixed") -> ScalePair:
    """Draw one scale pair from the training grids.

    ``mixed`` picks the symmetric or asymmetric grid with probability
    proportional to its size; ``integer`` draws from {2, 3, 4} (warm-up).
    """
    if mode == "symmetric":
        r = SYMMETRIC_SCALES[rng.integers(len(SYMMETRIC_SCALES))]
        return ScalePair(r, r)
    if mode == "asymmetric":
        h, v = ASYMMETRIC_SCALES[rng.integers(len(ASYMMETRIC_SCALES))]
        return ScalePair(h, v)
    if mode == "mixed":
        n_sym, n_asym = len(SYMMETRIC_SCALES), len(ASYMMETRIC_SCALES)
        i = rng.integers(n_sym + n_asym)
        if i < n_sym:
            r = SYMMETRIC_SCALES[i]
            return ScalePair(r, r)
        h, v = ASYMMETRIC_SCALES[i - n_sym]
        return ScalePair(h, v)
    if mode == "integer":
        r = INTEGER_SCALES[rng.integers(len(INTEGER_SCALES))]
        return ScalePair(r, r)
    raise ValueError(f"unknown scale mode {mode!r}; expected one of {MODES}")


def hr_patch_size(patch: int, scale: ScalePair) -> tuple[int, int]:
    """(rows, cols) of the HR crop matching an LR ``patch`` x ``patch`` crop."""
    return round_half_up(patch * scale.r_v), round_half_up(patch * scale.r_h)


@dataclass
class TrainSample:
    lr: np.ndarray      # (3, patch, patch)
    hr: np.ndarray      # (3, round(patch*r_v), round(patch*r_h))
    scale: ScalePair


def make_batch(images, scale: ScalePair, rng: np.random.Generator, batch: int = 16,
               patch: int = 50) -> list[TrainSample]:
    """Crop HR patches, degrade them bicubically and augment.

    One 90-degree rotation count is drawn for the whole batch (so all HR
    patches keep one shape); an odd count swaps the recorded scale.  Each
    sample additionally gets an independent 180-degree turn and horizontal
    flip.
    """
    if not len(images):
        raise ValueError("empty corpus")
    ph, pw = hr_patch_size(patch, scale)
    eligible = [i for i, im in enumerate(images) if im.shape[1] >= ph and im.shape[2] >= pw]
    if len(eligible) < len(images):
        warnings.warn(
            f"{len(images) - len(eligible)} image(s) smaller than {ph}x{pw} skipped "
            f"for scale {scale}", RuntimeWarning, stacklevel=2)
    if not eligible:
        raise ValueError(f"no image in the corpus is large enough for scale {scale}")

    quarter = int(rng.integers(4))
    out_scale = scale.swapped() if quarter % 2 else scale
    samples = []
    for _ in range(batch):
        img = images[eligible[rng.integers(len(eligible))]]
        top = int(rng.integers(img.shape[1] - ph + 1))
        left = int(rng.integers(img.shape[2] - pw + 1))
        hr = img[:, top:top + ph, left:left + pw]
        lr = np.clip(bicubic_resize(hr, patch, patch), 0.0, 1.0).astype(img.dtype)
        turns = quarter + 2 * int(rng.integers(2))
        flip = bool(rng.integers(2))
        samples.append(TrainSample(_augment(lr, turns, flip), _augment(hr, turns, flip), out_scale))
    return samples


def _augment(x, turns, flip):
    x = np.rot90(x, k=turns, axes=(1, 2))
    if flip:
        x = x[:, :, ::-1]
    return np.ascontiguousarray(x)


def collate(samples: list[TrainSample]):
    """Stack samples into ``(lr, hr, scale)`` arrays of shape (N, 3, H, W)."""
    lr = np.stack([s.lr for s in samples])
    hr = np.stack([s.hr for s in samples])
    return lr, hr, samples[0].scale


def degrade(hr: np.ndarray, scale: ScalePair):
    """Evaluation pair: crop ``hr`` (..., H, W) so it is an exact multiple, then downscale.

    Returns ``(lr, hr_cropped)``; the LR side is ``floor(H / r_v)`` by
    ``floor(W / r_h)`` and the HR crop is that size times the scale, rounded.
    """
    h, w = hr.shape[-2:]
    lr_h, lr_w = math.floor(h / scale.r_v + 1e-9), math.floor(w / scale.r_h + 1e-9)
    if lr_h < 1 or lr_w < 1:
        raise ValueError(f"image {h}x{w} too small for scale {scale}")
    hr_h = min(h, round_half_up(lr_h * scale.r_v))
    hr_w = min(w, round_half_up(lr_w * scale.r_h))
    hr = hr[..., :hr_h, :hr_w]
    lr = np.clip(bicubic_resize(hr, lr_h, lr_w), 0.0, 1.0).astype(hr.dtype)
    return lr, hr
