"""Training loop: integer-scale warm-up, mixed scales, L1 + Adam, checkpoints."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import numcore as nc
from .data.sampling import MODES, collate, make_batch, sample_scale
from .evalkit.metrics import evaluate, model_upscale
from .model.checkpoint import save_checkpoint
from .model.network import ArbNet
from .scale import ScalePair

log = logging.getLogger(__name__)

DEFAULT_VAL_SCALES = (ScalePair(2.0, 2.0), ScalePair(1.5, 1.5), ScalePair(1.5, 3.0))


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    iters_per_epoch: int = 200
    epochs: int = 20
    lr0: float = 1e-4
    lr_period: int = 30
    warmup_epochs: int = 1
    batch: int = 16
    patch: int = 50
    seed: int = 0
    scale_mode: str = "mixed"
    clip_norm: float = 10.0
    val_scales: tuple = DEFAULT_VAL_SCALES

    def __post_init__(self):
        for name in ("iters_per_epoch", "batch", "patch", "lr_period"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0 or self.warmup_epochs < 0:
            raise ValueError("epochs and warmup_epochs must be non-negative")
        if not self.lr0 > 0:
            raise ValueError("lr0 must be positive")
        if self.scale_mode not in MODES:
            raise ValueError(f"scale_mode must be one of {MODES}")
        self.val_scales = tuple(ScalePair.of(s) for s in self.val_scales)


def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    """Step decay: ``lr0`` halved every ``lr_period`` epochs."""
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    return cfg.lr0 * 0.5 ** (epoch // cfg.lr_period)


@dataclass
class TrainLog:
    # (iteration, epoch, loss, lr)
    steps: list = field(default_factory=list)
    # (epoch, r_h, r_v, psnr)
    validation: list = field(default_factory=list)
    scales: list = field(default_factory=list)

    @property
    def losses(self):
        return [s[2] for s in self.steps]

    @property
    def lrs(self):
        return [s[3] for s in self.steps]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("iteration", "epoch", "loss", "lr"))
            for it, ep, loss, lr in self.steps:
                w.writerow((it, ep, repr(loss), repr(lr)))

    def write_validation_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("epoch", "r_h", "r_v", "psnr"))
            for ep, rh, rv, p in self.validation:
                w.writerow((ep, f"{rh:g}", f"{rv:g}", f"{p:.6f}"))


def train_step(model: ArbNet, lr_batch, hr_batch, scale, lr: float, clip_norm: float | None):
    """One forward / L1 / backward / Adam step.  Returns the pre-step loss."""
    params = model.parameters()
    out, cache = model.forward(lr_batch, scale, hr_batch.shape[2:])
    loss, lcache = nc.l1_loss(out, hr_batch.astype(out.dtype, copy=False))
    if not math.isfinite(loss):
        raise FloatingPointError(f"non-finite loss {loss}")
    model.backward(nc.l1_loss_backward(lcache), cache)
    if clip_norm:
        nc.clip_grad_norm(params, clip_norm)
    nc.adam_step(params, lr)
    return loss


def _dump_failure(out_dir, batch, scale, lr, iteration, loss):
    if out_dir is None:
        return None
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"nan_iter{iteration}.npz"
    np.savez(path, lr=batch[0], hr=batch[1])
    (out_dir / f"nan_iter{iteration}.json").write_text(json.dumps(
        dict(iteration=iteration, lr=lr, loss=repr(loss), r_h=scale.r_h, r_v=scale.r_v)))
    return path


def train(model: ArbNet, corpus, cfg: TrainConfig, val_images=None, checkpoint=None,
          log_dir=None) -> tuple[ArbNet, TrainLog]:
    """Train ``model`` in place on a list of (3, H, W) HR images.

    Warm-up epochs draw only integer symmetric scales {2, 3, 4}; later
    epochs use ``cfg.scale_mode``.  With ``checkpoint`` set the model is
    saved there after every epoch (and once at the start, so zero epochs
    still leaves the initial weights on disk).  ``log_dir`` receives
    ``train_log.csv`` and ``val_log.csv``.
    """
    if not len(corpus):
        raise ValueError("empty corpus")
    rng = np.random.default_rng(cfg.seed)
    tlog = TrainLog()
    dtype = model.dtype
    corpus = [np.asarray(im, dtype=dtype) for im in corpus]
    if checkpoint is not None:
        save_checkpoint(model, checkpoint)
    iteration = 0
    for epoch in range(cfg.epochs):
        lr = lr_schedule(epoch, cfg)
        mode = "integer" if epoch < cfg.warmup_epochs else cfg.scale_mode
        for _ in range(cfg.iters_per_epoch):
            scale = sample_scale(rng, mode)
            lr_b, hr_b, scale = collate(make_batch(corpus, scale, rng, cfg.batch, cfg.patch))
            try:
                loss = train_step(model, lr_b, hr_b, scale, lr, cfg.clip_norm)
            except FloatingPointError as exc:
                dump = _dump_failure(log_dir, (lr_b, hr_b), scale, lr, iteration, exc)
                raise TrainingError(
                    f"{exc} at iteration {iteration} (epoch {epoch}, lr {lr:g}, scale {scale}); "
                    f"batch dumped to {dump}") from exc
            tlog.steps.append((iteration, epoch, loss, lr))
            tlog.scales.append(scale)
            iteration += 1
        if val_images:
            report = evaluate(model_upscale(model), val_images, cfg.val_scales,
                              dataset="val", with_ssim=False)
            for row in report.rows:
                tlog.validation.append((epoch, row.r_h, row.r_v, row.psnr))
            log.info("epoch %d validation: %s", epoch,
                     ", ".join(f"{r.r_h:g}x{r.r_v:g} {r.psnr:.2f} dB" for r in report.rows))
        log.info("epoch %d: mean loss %.5f", epoch,
                 float(np.mean(tlog.losses[-cfg.iters_per_epoch:])))
        if checkpoint is not None:
            save_checkpoint(model, checkpoint, extra=dict(epoch=epoch, config=_cfg_json(cfg)))
    if log_dir is not None:
        Path(log_dir).mkdir(parents=True, exist_ok=True)
        tlog.write_csv(Path(log_dir) / "train_log.csv")
        tlog.write_validation_csv(Path(log_dir) / "val_log.csv")
    return model, tlog


def _cfg_json(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["val_scales"] = [str(s) for s in cfg.val_scales]
    return d
