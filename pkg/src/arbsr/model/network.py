"""The full scale-arbitrary SR network."""
from __future__ import annotations

import numpy as np

from ..numcore import get_dtype
from ..scale import ScalePair, resolve_size, warn_if_untrained
from .config import ModelConfig
from .layers import (
    AdaptionBlock,
    BicubicUpsampler,
    Conv2d,
    Module,
    ResBlock,
    ScaleAwareUpsampler,
)


class ArbNet(Module):
    """Residual backbone with adaption blocks and a scale-aware upsampler.

    head conv (3 -> C), ``blocks`` residual blocks with an adaption block
    after every ``adapt_every`` of them, global skip, upsampler, tail conv
    (C -> 3).  Inputs are centred by subtracting 0.5 and outputs shifted
    back.  Output values are not clamped.
    """

    PIXEL_MEAN = 0.5

    def __init__(self, config: ModelConfig | None = None, seed: int = 0, dtype=None):
        super().__init__()
        self.config = config = config or ModelConfig()
        rng = np.random.default_rng(seed)
        zero = config.head_init == "zero"
        c = config.channels
        self.head = self.child("head", Conv2d(3, c, 3, rng))
        self.blocks = [self.child(f"blocks.{i}", ResBlock(c, rng)) for i in range(config.blocks)]
        self.adapt = [
            self.child(f"adapt.{j}", AdaptionBlock(
                c, config.experts, config.hidden, rng, guidance=config.guidance, zero_head=zero))
            for j in range(config.n_adaption)
        ]
        if config.upsampler == "scale_aware":
            self.upsampler = self.child("upsampler", ScaleAwareUpsampler(
                c, config.experts, config.hidden, rng, config.bottleneck_ratio, zero_head=zero))
        else:
            self.upsampler = BicubicUpsampler()
        self.tail = self.child("tail", Conv2d(c, 3, 3, rng))
        self.astype(dtype or get_dtype())

    def forward(self, x, scale, out_hw):
        """Run the network on ``x`` (N, 3, H, W) to size ``out_hw``.

        Returns ``(out, cache)``.  ``cache["features"]`` holds each residual
        block's output and ``cache["guidance"]`` each adaption block's map.
        """
        scale = ScalePair.of(scale)
        x = np.asarray(x, dtype=self.dtype) - self.PIXEL_MEAN
        f0, c_head = self.head.forward(x)
        h = f0
        c_blocks, c_adapt, features, guidance = [], [], [], []
        k = self.config.adapt_every
        for i, block in enumerate(self.blocks):
            h, cb = block.forward(h)
            c_blocks.append(cb)
            features.append(h)
            if self.adapt and (i + 1) % k == 0:
                adapt = self.adapt[(i + 1) // k - 1]
                h, ca = adapt.forward(h, scale)
                c_adapt.append(ca)
                guidance.append(AdaptionBlock.guidance_map(ca))
        h = h + f0
        u, c_up = self.upsampler.forward(h, scale, tuple(out_hw))
        out, c_tail = self.tail.forward(u)
        out += self.PIXEL_MEAN
        cache = dict(head=c_head, blocks=c_blocks, adapt=c_adapt, up=c_up, tail=c_tail,
                     features=features, guidance=guidance)
        return out, cache

    def backward(self, dout, cache):
        """Accumulate parameter gradients; return the gradient w.r.t. the input."""
        d = self.tail.backward(dout, cache["tail"])
        d = self.upsampler.backward(d, cache["up"])
        d_skip = d
        k = self.config.adapt_every
        for i in reversed(range(len(self.blocks))):
            if self.adapt and (i + 1) % k == 0:
                j = (i + 1) // k - 1
                d = self.adapt[j].backward(d, cache["adapt"][j])
            d = self.blocks[i].backward(d, cache["blocks"][i])
        return self.head.backward(d + d_skip, cache["head"])

    def predict(self, x, scale=None, size=None):
        """Super-resolve ``x`` (N, 3, H, W) given a scale or an ``(H_out, W_out)`` size."""
        x = np.asarray(x)
        scale, out_hw = resolve_size(x.shape[2:], scale=scale, size=size)
        warn_if_untrained(scale)
        out, _ = self.forward(x, scale, out_hw)
        return out

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self):
        return {name: p.value for name, p in self.named_parameters()}

    def routing_weights(self, scale):
        """Routing weights of every adaption block's expert bank at ``scale``."""
        scale = ScalePair.of(scale)
        return [blk.conv.bank.route(scale.conditioning())[0] for blk in self.adapt]
