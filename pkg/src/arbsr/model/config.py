"""Architecture hyperparameters."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

UPSAMPLERS = ("scale_aware", "bicubic")


class ConfigError(ValueError):
    """Raised for an inconsistent :class:`ModelConfig`."""


@dataclass(frozen=True)
class ModelConfig:
    """Backbone and plug-in module sizes.

    ``adaption`` inserts a scale-aware feature adaption block after every
    ``adapt_every`` residual blocks; ``guidance`` gates it with the hourglass
    map (off means the map is fixed to one).  ``upsampler="bicubic"`` swaps
    the scale-aware upsampler for fixed bicubic interpolation of features.
    """

    blocks: int = 8
    channels: int = 32
    adapt_every: int = 2
    experts: int = 4
    kernel_size: int = 1
    bottleneck_ratio: int = 8
    hidden: int = 64
    adaption: bool = True
    guidance: bool = True
    upsampler: str = "scale_aware"
    head_init: str = "zero"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.blocks < 1 or self.channels < 1 or self.experts < 1 or self.hidden < 1:
            raise ConfigError(f"sizes must be positive: {self}")
        if self.channels % self.bottleneck_ratio:
            raise ConfigError(
                f"channels ({self.channels}) must be divisible by {self.bottleneck_ratio}")
        if self.adapt_every < 1 or self.blocks % self.adapt_every:
            raise ConfigError(
                f"adapt_every ({self.adapt_every}) must divide blocks ({self.blocks})")
        if self.kernel_size != 1:
            raise ConfigError("only kernel_size=1 upsampling neighbourhoods are supported")
        if self.upsampler not in UPSAMPLERS:
            raise ConfigError(f"upsampler must be one of {UPSAMPLERS}, got {self.upsampler!r}")
        if self.head_init not in ("zero", "random"):
            raise ConfigError(f"head_init must be 'zero' or 'random', got {self.head_init!r}")

    @property
    def n_adaption(self) -> int:
        return self.blocks // self.adapt_every if self.adaption else 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
        return cls(**d)

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)


# ablation ladder: bicubic head -> scale-aware upsampler -> + adaption -> + guidance
VARIANTS = {
    "model1": dict(upsampler="bicubic", adaption=False),
    "model2": dict(upsampler="scale_aware", adaption=False),
    "model3": dict(upsampler="scale_aware", adaption=True, guidance=False),
    "model4": dict(upsampler="scale_aware", adaption=True, guidance=True),
}
