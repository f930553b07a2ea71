"""Layers of the scale-arbitrary network.

Each layer exposes ``forward(...) -> (out, cache)`` and
``backward(dout, cache) -> d_input``; parameter gradients are accumulated
into the layer's :class:`Parameter` objects.  Caches are returned rather
than stored, so a model can serve concurrent read-only forwards.
"""
from __future__ import annotations

import numpy as np

from .. import numcore as nc
from ..data.bicubic import bicubic_resize, bicubic_resize_backward
from ..numcore import Parameter
from .grid import build_grid


def kaiming_uniform(rng, shape, fan_in, dtype=None, a=np.sqrt(5.0)):
    # leaky-ReLU slope ``a``; the default gives a bound of 1/sqrt(fan_in)
    bound = np.sqrt(6.0 / ((1.0 + a * a) * fan_in))
    return Parameter(rng.uniform(-bound, bound, size=shape), dtype)


def zeros(shape, dtype=None):
    return Parameter(np.zeros(shape), dtype)


class Module:
    def __init__(self):
        self._params: dict[str, Parameter] = {}
        self._children: dict[str, Module] = {}

    def param(self, name, p: Parameter) -> Parameter:
        self._params[name] = p
        return p

    def child(self, name, m: "Module") -> "Module":
        self._children[name] = m
        return m

    def named_parameters(self, prefix=""):
        for name, p in self._params.items():
            yield prefix + name, p
        for name, m in self._children.items():
            yield from m.named_parameters(f"{prefix}{name}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def astype(self, dtype):
        for p in self.parameters():
            p.astype(dtype)
        return self

    @property
    def dtype(self):
        return next(iter(self.parameters())).value.dtype


class Conv2d(Module):
    def __init__(self, c_in, c_out, k, rng, stride=1, padding=None):
        super().__init__()
        self.stride = stride
        self.padding = k // 2 if padding is None else padding
        self.weight = self.param("weight", kaiming_uniform(rng, (c_out, c_in, k, k), c_in * k * k))
        self.bias = self.param("bias", zeros(c_out))

    def forward(self, x):
        return nc.conv2d(x, self.weight.value, self.bias.value, self.padding, self.stride)

    def backward(self, dout, cache):
        dx, dw, db = nc.conv2d_backward(dout, cache)
        self.weight.grad += dw
        self.bias.grad += db
        return dx


class Linear(Module):
    def __init__(self, d_in, d_out, rng, zero=False):
        super().__init__()
        if zero:
            self.weight = self.param("weight", zeros((d_out, d_in)))
        else:
            self.weight = self.param("weight", kaiming_uniform(rng, (d_out, d_in), d_in))
        self.bias = self.param("bias", zeros(d_out))

    def forward(self, x):
        return nc.linear(x, self.weight.value, self.bias.value)

    def backward(self, dout, cache):
        dx, dw, db = nc.linear_backward(dout, cache)
        self.weight.grad += dw
        self.bias.grad += db
        return dx


class MLP(Module):
    """Two fully connected layers with a ReLU between them."""

    def __init__(self, d_in, hidden, d_out, rng, zero_final=False):
        super().__init__()
        self.fc1 = self.child("fc1", Linear(d_in, hidden, rng))
        self.fc2 = self.child("fc2", Linear(hidden, d_out, rng, zero=zero_final))

    def forward(self, x):
        h, c1 = self.fc1.forward(x)
        a, cr = nc.relu(h)
        out, c2 = self.fc2.forward(a)
        return out, (c1, cr, c2)

    def backward(self, dout, cache):
        c1, cr, c2 = cache
        da = self.fc2.backward(dout, c2)
        return self.fc1.backward(nc.relu_backward(da, cr), c1)


class ResBlock(Module):
    def __init__(self, channels, rng):
        super().__init__()
        self.conv1 = self.child("conv1", Conv2d(channels, channels, 3, rng))
        self.conv2 = self.child("conv2", Conv2d(channels, channels, 3, rng))

    def forward(self, x):
        h, c1 = self.conv1.forward(x)
        a, cr = nc.relu(h)
        r, c2 = self.conv2.forward(a)
        return x + r, (c1, cr, c2)

    def backward(self, dout, cache):
        c1, cr, c2 = cache
        da = self.conv2.backward(dout, c2)
        return dout + self.conv1.backward(nc.relu_backward(da, cr), c1)


class ExpertBank(Module):
    """``E`` kernels mixed by softmax routing weights from a small controller."""

    def __init__(self, expert_shape, n_experts, d_cond, hidden, rng, fan_in, zero_head=True):
        super().__init__()
        self.experts = self.param(
            "experts", kaiming_uniform(rng, (n_experts,) + tuple(expert_shape), fan_in))
        self.controller = self.child(
            "controller", MLP(d_cond, hidden, n_experts, rng, zero_final=zero_head))

    @property
    def n_experts(self):
        return self.experts.shape[0]

    def route(self, conditioning):
        """Return ``(weights, filter, cache)`` for one conditioning vector."""
        cond = np.asarray(conditioning, dtype=self.experts.value.dtype)
        logits, c_ctrl = self.controller.forward(cond)
        weights, _ = nc.softmax(logits)
        filt = np.tensordot(weights, self.experts.value, axes=1)
        return weights, filt, (c_ctrl, weights)

    def route_backward(self, dfilter, cache, dweights=None):
        c_ctrl, weights = cache
        ex = self.experts.value
        self.experts.grad += weights.reshape((-1,) + (1,) * (ex.ndim - 1)) * dfilter
        dw = np.tensordot(ex, dfilter, axes=ex.ndim - 1)
        if dweights is not None:
            dw = dw + dweights
        self.controller.backward(nc.softmax_backward(dw, weights), c_ctrl)


class ScaleAwareConv(Module):
    """3x3 convolution whose kernel is a scale-conditioned expert mixture."""

    def __init__(self, channels, n_experts, hidden, rng, zero_head=True):
        super().__init__()
        self.bank = self.child("bank", ExpertBank(
            (channels, channels, 3, 3), n_experts, 2, hidden, rng, channels * 9, zero_head))
        self.bias = self.param("bias", zeros(channels))

    def forward(self, x, scale):
        weights, filt, c_route = self.bank.route(scale.conditioning())
        out, c_conv = nc.conv2d(x, filt, self.bias.value, padding=1)
        return out, (c_route, c_conv)

    def backward(self, dout, cache):
        c_route, c_conv = cache
        dx, dfilt, db = nc.conv2d_backward(dout, c_conv)
        self.bias.grad += db
        self.bank.route_backward(dfilt, c_route)
        return dx


class Hourglass(Module):
    """Strided conv, conv, nearest x2 upsample, conv, conv to one channel, sigmoid."""

    def __init__(self, channels, rng):
        super().__init__()
        c4 = max(1, channels // 4)
        self.conv1 = self.child("conv1", Conv2d(channels, c4, 3, rng, stride=2))
        self.conv2 = self.child("conv2", Conv2d(c4, c4, 3, rng))
        self.conv3 = self.child("conv3", Conv2d(c4, c4, 3, rng))
        self.conv4 = self.child("conv4", Conv2d(c4, 1, 3, rng))

    def forward(self, x):
        h, c1 = self.conv1.forward(x)
        h, r1 = nc.relu(h)
        h, c2 = self.conv2.forward(h)
        h, r2 = nc.relu(h)
        h, cu = nc.upsample_nearest(h, 2, size=x.shape[2:])
        h, c3 = self.conv3.forward(h)
        h, r3 = nc.relu(h)
        h, c4 = self.conv4.forward(h)
        m, cs = nc.sigmoid(h)
        return m, (c1, r1, c2, r2, cu, c3, r3, c4, cs)

    def backward(self, dout, cache):
        c1, r1, c2, r2, cu, c3, r3, c4, cs = cache
        d = self.conv4.backward(nc.sigmoid_backward(dout, cs), c4)
        d = self.conv3.backward(nc.relu_backward(d, r3), c3)
        d = nc.upsample_nearest_backward(d, cu)
        d = self.conv2.backward(nc.relu_backward(d, r2), c2)
        return self.conv1.backward(nc.relu_backward(d, r1), c1)


class AdaptionBlock(Module):
    """``F + F_adapt * M``: scale-aware conv output gated by a guidance map."""

    def __init__(self, channels, n_experts, hidden, rng, guidance=True, zero_head=True):
        super().__init__()
        self.conv = self.child("conv", ScaleAwareConv(channels, n_experts, hidden, rng, zero_head))
        self.hourglass = self.child("hourglass", Hourglass(channels, rng)) if guidance else None

    def forward(self, x, scale):
        adapt, c_conv = self.conv.forward(x, scale)
        if self.hourglass is None:
            return x + adapt, (c_conv, None, None, None)
        guide, c_hg = self.hourglass.forward(x)
        gated, c_mul = nc.mul(adapt, guide)
        return x + gated, (c_conv, c_hg, c_mul, guide)

    def backward(self, dout, cache):
        c_conv, c_hg, c_mul, _ = cache
        dx = dout
        if self.hourglass is None:
            dadapt = dout
        else:
            dadapt, dguide = nc.mul_backward(dout, c_mul)
            dx = dx + self.hourglass.backward(dguide, c_hg)
        return dx + self.conv.backward(dadapt, c_conv)

    @staticmethod
    def guidance_map(cache):
        return cache[3]


class ScaleAwareUpsampler(Module):
    """Per-output-pixel resampling with predicted offsets and 1x1 filter pairs.

    Every output pixel is projected into the input grid.  Its relative
    position and the scale pass through a two-layer trunk feeding a filter
    head (routing weights for a bottleneck and an expansion expert group)
    and an offset head (a tanh-bounded shift in input pixels).  The feature
    vector is read bilinearly at the shifted position and pushed through the
    mixed bottleneck then expansion filters.
    """

    def __init__(self, channels, n_experts, hidden, rng, bottleneck_ratio=8, zero_head=True):
        super().__init__()
        c8 = channels // bottleneck_ratio
        self.channels, self.reduced, self.n_experts = channels, c8, n_experts
        self.fc1 = self.child("fc1", Linear(4, hidden, rng))
        self.fc2 = self.child("fc2", Linear(hidden, hidden, rng))
        self.route_head = self.child("route_head", Linear(hidden, 2 * n_experts, rng, zero=zero_head))
        self.offset_head = self.child("offset_head", Linear(hidden, 2, rng, zero=zero_head))
        self.bottleneck = self.param(
            "bottleneck", kaiming_uniform(rng, (n_experts, c8, channels), channels))
        self.expansion = self.param(
            "expansion", kaiming_uniform(rng, (n_experts, channels, c8), c8))

    def conditioning(self, grid, scale):
        h_out, w_out = grid.shape
        cond = np.empty((h_out, w_out, 4), dtype=np.float64)
        cond[..., 0] = grid.rx[None, :]
        cond[..., 1] = grid.ry[:, None]
        cond[..., 2], cond[..., 3] = scale.conditioning()
        return cond.reshape(-1, 4)

    def heads(self, cond):
        """Routing weights (P, E) x2 and offsets (P, 2) for conditioning rows."""
        dtype = self.bottleneck.value.dtype
        h, c1 = self.fc1.forward(cond.astype(dtype))
        h, r1 = nc.relu(h)
        h, c2 = self.fc2.forward(h)
        h, r2 = nc.relu(h)
        logits, c_route = self.route_head.forward(h)
        e = self.n_experts
        w_b, _ = nc.softmax(logits[:, :e])
        w_e, _ = nc.softmax(logits[:, e:])
        raw, c_off = self.offset_head.forward(h)
        offsets, _ = nc.tanh(raw)
        return w_b, w_e, offsets, (c1, r1, c2, r2, c_route, c_off)

    def forward(self, x, scale, out_hw):
        n, c, h, w = x.shape
        h_out, w_out = out_hw
        grid = build_grid(h, w, h_out, w_out)
        w_b, w_e, offsets, c_heads = self.heads(self.conditioning(grid, scale))
        px = (np.broadcast_to(grid.lx[None, :], (h_out, w_out)).ravel() + offsets[:, 0])
        py = (np.broadcast_to(grid.ly[:, None], (h_out, w_out)).ravel() + offsets[:, 1])
        sampler = nc.BilinearSampler(h, w, px, py, dtype=x.dtype)
        cols = x.transpose(2, 3, 0, 1).reshape(h * w, n * c)
        p = h_out * w_out
        v = np.asarray(sampler.sample_columns(cols)).reshape(p, n, c)
        e, c8 = self.n_experts, self.reduced
        filt_b = (w_b @ self.bottleneck.value.reshape(e, -1)).reshape(p, c8, c)
        filt_e = (w_e @ self.expansion.value.reshape(e, -1)).reshape(p, c, c8)
        z = np.matmul(v, filt_b.transpose(0, 2, 1))
        u = np.matmul(z, filt_e.transpose(0, 2, 1))
        out = np.ascontiguousarray(u.reshape(h_out, w_out, n, c).transpose(2, 3, 0, 1))
        cache = (x.shape, cols, sampler, v, z, filt_b, filt_e, w_b, w_e, offsets, c_heads)
        return out, cache

    def backward(self, dout, cache):
        shape, cols, sampler, v, z, filt_b, filt_e, w_b, w_e, offsets, c_heads = cache
        n, c, h, w = shape
        e = self.n_experts
        p = v.shape[0]
        du = dout.transpose(2, 3, 0, 1).reshape(p, n, c)
        dfilt_e = np.matmul(du.transpose(0, 2, 1), z)
        dz = np.matmul(du, filt_e)
        dfilt_b = np.matmul(dz.transpose(0, 2, 1), v)
        dv = np.matmul(dz, filt_b)

        ex_e = self.expansion.value.reshape(e, -1)
        ex_b = self.bottleneck.value.reshape(e, -1)
        dfe = dfilt_e.reshape(p, -1)
        dfb = dfilt_b.reshape(p, -1)
        self.expansion.grad += (w_e.T @ dfe).reshape(self.expansion.shape)
        self.bottleneck.grad += (w_b.T @ dfb).reshape(self.bottleneck.shape)
        dw_e = dfe @ ex_e.T
        dw_b = dfb @ ex_b.T

        dcols, dpx, dpy = sampler.backward_columns(dv.reshape(p, n * c), cols)
        dx = np.asarray(dcols).reshape(h, w, n, c).transpose(2, 3, 0, 1)

        c1, r1, c2, r2, c_route, c_off = c_heads
        dlogits = np.concatenate(
            [nc.softmax_backward(dw_b, w_b), nc.softmax_backward(dw_e, w_e)], axis=1)
        doff = nc.tanh_backward(np.stack([dpx, dpy], axis=1).astype(offsets.dtype), offsets)
        dh = self.route_head.backward(dlogits, c_route) + self.offset_head.backward(doff, c_off)
        dh = self.fc2.backward(nc.relu_backward(dh, r2), c2)
        self.fc1.backward(nc.relu_backward(dh, r1), c1)
        return np.ascontiguousarray(dx)


class BicubicUpsampler(Module):
    """Fixed bicubic interpolation of feature maps; no parameters."""

    def forward(self, x, scale, out_hw):
        return bicubic_resize(x, *out_hw), x.shape[2:]

    def backward(self, dout, cache):
        return bicubic_resize_backward(dout, cache)
