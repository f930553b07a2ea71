"""Luminance PSNR / SSIM with border cropping."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..data.bicubic import bicubic_resize
from ..data.imageio import to_image, to_tensor
from ..data.sampling import degrade
from ..scale import ScalePair

PSNR_CAP = 100.0
_Y_COEF = np.array([65.481, 128.553, 24.966])


def to_luminance(img) -> np.ndarray:
    """BT.601 luma in [16, 235].

    Accepts an (H, W, 3) uint8 image, a (3, H, W) float tensor in [0, 1] or
    an (N, 3, H, W) batch; returns (1, H, W) or (N, 1, H, W).
    """
    img = np.asarray(img)
    if img.dtype == np.uint8:
        img = to_tensor(img, np.float64)[0]
    img = img.astype(np.float64, copy=False)
    if img.shape[-3] != 3:
        raise ValueError(f"expected 3 colour channels on axis -3, got shape {img.shape}")
    y = 16.0 + np.tensordot(_Y_COEF, np.moveaxis(img, -3, 0), axes=1)
    return np.expand_dims(y, -3)


def border_for(scale: ScalePair) -> int:
    return math.ceil(max(scale.r_h, scale.r_v))


def crop_border(img, border: int):
    img = np.asarray(img)
    if border == 0:
        return img
    h, w = img.shape[-2:]
    if 2 * border >= h or 2 * border >= w:
        raise ValueError(f"border {border} leaves nothing of a {h}x{w} image")
    return img[..., border:h - border, border:w - border]


def _check_pair(pred, ref):
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if pred.shape != ref.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {ref.shape}")
    return pred, ref


def psnr(pred, ref, border: int = 0, peak: float = 255.0) -> float:
    """PSNR in dB between two luminance arrays, capped at 100 dB."""
    pred, ref = _check_pair(pred, ref)
    pred, ref = crop_border(pred, border), crop_border(ref, border)
    mse = float(np.mean((pred - ref) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(peak * peak / mse))


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def _filter_valid(img, g):
    k = len(g)
    rows = sliding_window_view(img, k, axis=-2) @ g
    return sliding_window_view(rows, k, axis=-1) @ g


def ssim(pred, ref, border: int = 0, peak: float = 255.0, window: int = 11,
         sigma: float = 1.5, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean SSIM over all fully-contained Gaussian windows of 2-D images."""
    pred, ref = _check_pair(pred, ref)
    pred, ref = crop_border(pred, border), crop_border(ref, border)
    pred, ref = np.squeeze(pred), np.squeeze(ref)
    if pred.ndim != 2:
        raise ValueError(f"ssim expects single-channel images, got shape {pred.shape}")
    if min(pred.shape) < window:
        raise ValueError(f"image {pred.shape} smaller than the {window}x{window} window")
    c1, c2 = (k1 * peak) ** 2, (k2 * peak) ** 2
    g = gaussian_window(window, sigma)
    mu_x, mu_y = _filter_valid(pred, g), _filter_valid(ref, g)
    sxx = _filter_valid(pred * pred, g) - mu_x ** 2
    syy = _filter_valid(ref * ref, g) - mu_y ** 2
    sxy = _filter_valid(pred * ref, g) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def quantize(t) -> np.ndarray:
    """Clamp a (3, H, W) or (1, 3, H, W) float tensor to 8-bit and back."""
    return to_tensor(to_image(t), np.float64)[0]


def score_pair(pred, ref, scale: ScalePair, with_ssim: bool = True):
    """(psnr, ssim) on the luminance of two (3, H, W) tensors after 8-bit export."""
    border = border_for(scale)
    yp = to_luminance(quantize(pred))[0]
    yr = to_luminance(quantize(ref))[0]
    p = psnr(yp, yr, border)
    s = ssim(yp, yr, border) if with_ssim else float("nan")
    return p, s


@dataclass
class MetricRow:
    dataset: str
    r_h: float
    r_v: float
    n: int
    psnr: float
    ssim: float


@dataclass
class MetricReport:
    rows: list[MetricRow] = field(default_factory=list)

    FIELDS = ("dataset", "r_h", "r_v", "n", "psnr", "ssim")

    def add(self, row: MetricRow) -> None:
        self.rows.append(row)

    def lookup(self, scale: ScalePair, dataset: str | None = None) -> MetricRow:
        for row in self.rows:
            if (row.r_h, row.r_v) == (scale.r_h, scale.r_v) and dataset in (None, row.dataset):
                return row
        raise KeyError(f"no row for scale {scale}")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.FIELDS)
            for r in self.rows:
                w.writerow([r.dataset, f"{r.r_h:g}", f"{r.r_v:g}", r.n, f"{r.psnr:.4f}", f"{r.ssim:.6f}"])


def evaluate(upscale, images, scales, dataset: str = "eval", with_ssim: bool = True) -> MetricReport:
    """Mean luminance PSNR/SSIM of ``upscale(lr, scale, out_hw)`` per scale.

    ``images`` are (3, H, W) HR tensors in [0, 1]; each is degraded with
    :func:`degrade` before being handed to ``upscale``.
    """
    report = MetricReport()
    for scale in scales:
        scale = ScalePair.of(scale)
        ps, ss = [], []
        for hr in images:
            lr, hr_c = degrade(np.asarray(hr), scale)
            sr = upscale(lr[None], scale, hr_c.shape[-2:])[0]
            p, s = score_pair(sr, hr_c, scale, with_ssim)
            ps.append(p)
            ss.append(s)
        report.add(MetricRow(dataset, scale.r_h, scale.r_v, len(ps), float(np.mean(ps)),
                             float(np.mean(ss))))
    return report


def bicubic_upscale(lr, scale, out_hw):
    return bicubic_resize(lr, *out_hw)


def model_upscale(model):
    def run(lr, scale, out_hw):
        out, _ = model.forward(lr, scale, out_hw)
        return out
    return run
