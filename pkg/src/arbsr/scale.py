"""Horizontal/vertical scale factors and the size <-> scale contract."""
from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass

TRAINED_RANGE = (1.0, 4.0)

_SCALE_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(?:[xX]\s*(\d+(?:\.\d+)?))?\s*$")
_SIZE_RE = re.compile(r"^\s*(\d+)\s*[xX]\s*(\d+)\s*$")


@dataclass(frozen=True)
class ScalePair:
    """Scale factors: ``r_h`` widens columns, ``r_v`` widens rows."""

    r_h: float
    r_v: float

    def __post_init__(self):
        for name in ("r_h", "r_v"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
            object.__setattr__(self, name, value)

    @classmethod
    def of(cls, value) -> "ScalePair":
        """Coerce a number, a 2-tuple ``(r_h, r_v)``, a string or a ScalePair."""
        if isinstance(value, ScalePair):
            return value
        if isinstance(value, str):
            return parse_scale(value)
        if isinstance(value, (tuple, list)):
            r_h, r_v = value
            return cls(r_h, r_v)
        return cls(value, value)

    @property
    def symmetric(self) -> bool:
        return self.r_h == self.r_v

    @property
    def in_trained_range(self) -> bool:
        lo, hi = TRAINED_RANGE
        return lo <= self.r_h <= hi and lo <= self.r_v <= hi

    def swapped(self) -> "ScalePair":
        return ScalePair(self.r_v, self.r_h)

    def conditioning(self) -> tuple[float, float]:
        """Scale factors divided by 4, as fed to the routing controllers."""
        return self.r_h / 4.0, self.r_v / 4.0

    def __str__(self):
        return f"{self.r_h:g}x{self.r_v:g}"


def round_half_up(x: float) -> int:
    # tolerate representation error such as 2.2 * 100 = 220.00000000000003
    return math.floor(x + 0.5 + 1e-9)


def parse_scale(text: str) -> ScalePair:
    """Parse ``R`` or ``RHxRV`` (e.g. ``2``, ``1.5``, ``2.2x4.2``)."""
    m = _SCALE_RE.match(text)
    if not m:
        raise ValueError(f"malformed scale {text!r}; expected R or RHxRV, e.g. 2.2x4.2")
    r_h = float(m.group(1))
    r_v = float(m.group(2)) if m.group(2) is not None else r_h
    return ScalePair(r_h, r_v)


def parse_size(text: str) -> tuple[int, int]:
    """Parse ``WxH`` into ``(width, height)``."""
    m = _SIZE_RE.match(text)
    if not m or int(m.group(1)) < 1 or int(m.group(2)) < 1:
        raise ValueError(f"malformed size {text!r}; expected WxH, e.g. 220x420")
    return int(m.group(1)), int(m.group(2))


def parse_scale_list(text: str) -> list[ScalePair]:
    return [parse_scale(part) for part in text.split(",") if part.strip()]


def resolve_size(in_hw, scale=None, size=None):
    """Return ``(scale, (H_out, W_out))`` from exactly one of scale / size.

    ``size`` is ``(height, width)``.  A scale gives ``r * dim`` rounded half up; a size
    gives the real-valued ratio as the scale.
    """
    h, w = in_hw
    if (scale is None) == (size is None):
        raise ValueError("give exactly one of scale or size")
    if size is not None:
        h_out, w_out = int(size[0]), int(size[1])
        if h_out < 1 or w_out < 1:
            raise ValueError(f"target size must be positive, got {size}")
        return ScalePair(w_out / w, h_out / h), (h_out, w_out)
    scale = ScalePair.of(scale)
    return scale, (max(1, round_half_up(scale.r_v * h)), max(1, round_half_up(scale.r_h * w)))


def warn_if_untrained(scale: ScalePair) -> None:
    if not scale.in_trained_range:
        warnings.warn(f"scale {scale} lies outside the trained range {TRAINED_RANGE}",
                      RuntimeWarning, stacklevel=3)
