"""scikit-learn style estimator around the network and trainer."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .evalkit.metrics import evaluate, model_upscale
from .model import ArbNet, ModelConfig
from .model.checkpoint import load_checkpoint, save_checkpoint
from .scale import ScalePair
from .trainer import TrainConfig, train


def check_image(img) -> np.ndarray:
    """Validate one image and return it as float (3, H, W) in [0, 1].

    Accepts uint8 (H, W, 3) images or float (3, H, W) arrays already in [0, 1].
    """
    if isinstance(img, np.ndarray) and img.dtype == np.uint8:
        arr = check_array(img, allow_nd=True, ensure_2d=False, dtype=None)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"uint8 images must be (H, W, 3), got {arr.shape}")
        return arr.transpose(2, 0, 1).astype(np.float64) / 255.0
    arr = check_array(img, allow_nd=True, ensure_2d=False, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ValueError(f"float images must be (3, H, W), got {arr.shape}")
    return arr


def check_images(X) -> list[np.ndarray]:
    if isinstance(X, np.ndarray) and X.ndim == 3:
        X = [X]
    images = [check_image(x) for x in X]
    if not images:
        raise ValueError("need at least one image")
    return images


class ArbSR(BaseEstimator):
    """Scale-arbitrary super-resolution as a fit/predict estimator.

    ``fit(X)`` trains on HR images (LR inputs are synthesised by bicubic
    degradation, so there is no ``y``).  ``predict(X)`` upscales LR images
    by ``scale`` (or to ``size``) and returns float (3, H, W) arrays.
    ``score(X)`` is the mean luminance PSNR over ``eval_scales`` when the
    images in ``X`` are treated as HR references.
    """

    def __init__(self, blocks=8, channels=32, adapt_every=2, experts=4, upsampler="scale_aware",
                 adaption=True, guidance=True, epochs=20, iters_per_epoch=200, lr0=1e-4,
                 batch=16, patch=50, scale=2.0, eval_scales=((2, 2), (1.5, 1.5), (1.5, 3.0)),
                 seed=0):
        self.blocks = blocks
        self.channels = channels
        self.adapt_every = adapt_every
        self.experts = experts
        self.upsampler = upsampler
        self.adaption = adaption
        self.guidance = guidance
        self.epochs = epochs
        self.iters_per_epoch = iters_per_epoch
        self.lr0 = lr0
        self.batch = batch
        self.patch = patch
        self.scale = scale
        self.eval_scales = eval_scales
        self.seed = seed

    def model_config(self) -> ModelConfig:
        return ModelConfig(blocks=self.blocks, channels=self.channels, adapt_every=self.adapt_every,
                           experts=self.experts, upsampler=self.upsampler,
                           adaption=self.adaption, guidance=self.guidance)

    def train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, iters_per_epoch=self.iters_per_epoch, lr0=self.lr0,
                           batch=self.batch, patch=self.patch, seed=self.seed)

    def fit(self, X, y=None):
        images = check_images(X)
        self.model_ = ArbNet(self.model_config(), seed=self.seed)
        _, self.log_ = train(self.model_, images, self.train_config())
        return self

    def predict(self, X, scale=None, size=None):
        """Upscale each LR image; ``size`` is (H_out, W_out) and overrides ``scale``."""
        check_is_fitted(self, "model_")
        if size is None and scale is None:
            scale = self.scale
        out = []
        for img in check_images(X):
            sr = self.model_.predict(img[None], scale=None if size else scale, size=size)
            out.append(np.asarray(sr[0], dtype=np.float64))
        return out

    def score(self, X, y=None) -> float:
        check_is_fitted(self, "model_")
        report = evaluate(model_upscale(self.model_), check_images(X),
                          [ScalePair.of(s) for s in self.eval_scales], with_ssim=False)
        return float(np.mean([r.psnr for r in report.rows]))

    def save(self, path) -> None:
        check_is_fitted(self, "model_")
        save_checkpoint(self.model_, path, extra={"estimator": _jsonable(self.get_params())})

    @classmethod
    def load(cls, path) -> "ArbSR":
        model = load_checkpoint(path)
        cfg = model.config
        est = cls(blocks=cfg.blocks, channels=cfg.channels, adapt_every=cfg.adapt_every,
                  experts=cfg.experts, upsampler=cfg.upsampler, adaption=cfg.adaption,
                  guidance=cfg.guidance)
        est.model_ = model
        return est


def _jsonable(params: dict) -> dict:
    return {k: [list(s) if isinstance(s, tuple) else s for s in v] if isinstance(v, tuple) else v
            for k, v in params.items()}
