"""Ablation harness: train network variants under one budget and compare."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..model import VARIANTS, ArbNet, ModelConfig
from ..scale import ScalePair
from .metrics import MetricReport, evaluate, model_upscale

log = logging.getLogger(__name__)

SYMMETRIC_EVAL = ((1.5, 1.5), (2.5, 2.5), (3.5, 3.5))
ASYMMETRIC_EVAL = ((1.5, 3.0), (3.0, 1.5), (2.0, 3.5))
DEFAULT_SCALES = SYMMETRIC_EVAL + ASYMMETRIC_EVAL


@dataclass(frozen=True)
class Variant:
    name: str
    experts: int
    config: ModelConfig

    @property
    def label(self) -> str:
        return f"{self.name}-E{self.experts}"


def make_variants(names=tuple(VARIANTS), experts=(4,), base: ModelConfig | None = None):
    """Cross product of variant names and expert counts over ``base``."""
    base = base or ModelConfig()
    out = []
    for name in names:
        if name not in VARIANTS:
            raise ValueError(f"unknown variant {name!r}; expected one of {sorted(VARIANTS)}")
        for e in experts:
            out.append(Variant(name, int(e), base.replace(experts=int(e), **VARIANTS[name])))
    return out


@dataclass
class AblationResult:
    scales: tuple
    # (variant label, seed) -> psnr per scale, in ``scales`` order
    psnr: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)

    def mean(self, label: str, seed: int, subset=None) -> float:
        keep = [ScalePair.of(s) for s in (subset if subset is not None else self.scales)]
        idx = [i for i, s in enumerate(self.scales) if ScalePair.of(s) in keep]
        if not idx:
            raise ValueError("no evaluated scale in the requested subset")
        return float(np.mean([self.psnr[(label, seed)][i] for i in idx]))

    def report(self) -> MetricReport:
        """Long-form metrics; the dataset column is ``<variant>-E<experts>-s<seed>``."""
        return MetricReport(list(self.rows))

    def write_table(self, path) -> None:
        """Wide CSV: one row per (variant, seed), one PSNR column per scale."""
        cols = [f"x{ScalePair.of(s)}" for s in self.scales]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["variant", "seed"] + cols + ["mean"])
            for (label, seed), values in self.psnr.items():
                w.writerow([label, seed] + [f"{v:.4f}" for v in values] + [f"{np.mean(values):.4f}"])


def run_ablation(corpus, val_images, variants, train_cfg, scales=DEFAULT_SCALES,
                 seeds=(0,), out_dir=None) -> AblationResult:
    """Train every variant for every seed with ``train_cfg`` and score on ``val_images``.

    The model seed and the training seed are both set to ``seed``, so all
    variants of one seed see the same batches.
    """
    from ..trainer import train  # the trainer itself imports evalkit.metrics

    result = AblationResult(tuple(scales))
    for seed in seeds:
        cfg = replace(train_cfg, seed=int(seed))
        for v in variants:
            model = ArbNet(v.config, seed=int(seed))
            train(model, corpus, cfg)
            rep = evaluate(model_upscale(model), val_images, scales,
                           dataset=f"{v.label}-s{seed}", with_ssim=False)
            result.psnr[(v.label, int(seed))] = [r.psnr for r in rep.rows]
            result.rows.extend(rep.rows)
            log.info("%s seed %d: %s", v.label, seed,
                     ", ".join(f"{r.psnr:.2f}" for r in rep.rows))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        result.write_table(out_dir / "ablation_table.csv")
        result.report().write_csv(out_dir / "ablation_metrics.csv")
    return result
