"""Finite-difference checks of every differentiable operation.

Each check builds a small random instance, projects the output onto a
random direction to get a scalar loss, and compares analytic gradients
(inputs and parameters) against central differences at float64.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import numcore as nc
from .model import AdaptionBlock, ArbNet, ExpertBank, ModelConfig, ScaleAwareUpsampler
from .numcore import GradCheckReport, grad_check_report, precision
from .scale import ScalePair

OP_TOL = 1e-4
NET_TOL = 1e-3
# central-difference step; smaller steps let float64 roundoff dominate on tiny gradients
STEP = 1e-5
# estimates at STEP and STEP/2 must agree this well for a coordinate to count
SMOOTH_TOL = 1e-5
# a check fails if more than this share of coordinates is not smooth
MAX_SKIPPED = 0.1


@dataclass
class CheckResult:
    name: str
    error: float
    tol: float
    seconds: float

    checked: int = 0
    skipped: int = 0

    @property
    def skipped_fraction(self) -> float:
        total = self.checked + self.skipped
        return self.skipped / total if total else 0.0

    @property
    def ok(self) -> bool:
        return bool(np.isfinite(self.error) and self.error < self.tol
                    and self.checked > 0 and self.skipped_fraction <= MAX_SKIPPED)


def _check(func, inputs, max_coords=None, rng=None):
    return grad_check_report(func, inputs, h=STEP, max_coords=max_coords, rng=rng,
                             smooth_tol=SMOOTH_TOL)


def _jitter(module, rng):
    # nonzero biases keep ReLU inputs away from the kink
    for name, p in module.named_parameters():
        if name.endswith("bias"):
            p.value[:] = rng.normal(scale=0.1, size=p.shape)
    return module


def _projected(fn, backward, proj):
    def f(*inputs):
        out, cache = fn(*inputs)
        grads = backward(proj, cache)
        return float(np.sum(out * proj)), grads if isinstance(grads, tuple) else (grads,)
    return f


def _module_check(module, forward, x, out_shape, rng, max_coords=None):
    proj = rng.normal(size=out_shape)
    params = module.parameters()

    def f(*arrays):
        for p in params:
            p.zero_grad()
        out, cache = forward()
        dx = module.backward(proj, cache)
        return float(np.sum(out * proj)), [dx] + [p.grad.copy() for p in params]
    return _check(f, [x] + [p.value for p in params], max_coords=max_coords, rng=rng)


def check_conv2d(rng):
    x = rng.normal(size=(2, 3, 5, 6))
    w = rng.normal(size=(4, 3, 3, 3))
    b = rng.normal(size=4)
    reports = []
    for stride in (1, 2):
        out, _ = nc.conv2d(x, w, b, 1, stride)
        proj = rng.normal(size=out.shape)
        f = _projected(lambda x, w, b: nc.conv2d(x, w, b, 1, stride), nc.conv2d_backward, proj)
        reports.append(_check(f, [x, w, b]))
    return GradCheckReport(max(r.max_error for r in reports), sum(r.checked for r in reports),
                           sum(r.skipped for r in reports))


def check_linear(rng):
    x = rng.normal(size=(5, 4))
    w = rng.normal(size=(3, 4))
    b = rng.normal(size=3)
    f = _projected(nc.linear, nc.linear_backward, rng.normal(size=(5, 3)))
    return _check(f, [x, w, b])


def _pointwise(op, backward, rng):
    x = rng.normal(size=(2, 3, 4, 4))
    # keep ReLU inputs off zero
    x += np.sign(x) * 0.05
    return _check(_projected(op, backward, rng.normal(size=x.shape)), [x])


def check_sigmoid(rng):
    return _pointwise(nc.sigmoid, nc.sigmoid_backward, rng)


def check_relu(rng):
    return _pointwise(nc.relu, nc.relu_backward, rng)


def check_softmax(rng):
    v = rng.normal(size=(4, 6))
    f = _projected(nc.softmax, lambda d, c: (nc.softmax_backward(d, c),), rng.normal(size=v.shape))
    return _check(f, [v])


def check_bilinear(rng):
    img = rng.normal(size=(2, 3, 5, 6))
    # keep coordinates away from integer lattice lines where the sampler is not smooth
    x = rng.integers(0, 5, size=(4, 5)) + rng.uniform(0.1, 0.9, size=(4, 5))
    y = rng.integers(0, 4, size=(4, 5)) + rng.uniform(0.1, 0.9, size=(4, 5))
    f = _projected(nc.bilinear_sample, nc.bilinear_sample_backward,
                   rng.normal(size=(2, 3, 4, 5)))
    return _check(f, [img, x, y])


def check_route(rng):
    bank = _jitter(ExpertBank((3, 3, 3, 3), 4, 2, 8, rng, 27, zero_head=False), rng)
    proj = rng.normal(size=(3, 3, 3, 3))
    params = bank.parameters()

    def f(*arrays):
        for p in params:
            p.zero_grad()
        _, filt, cache = bank.route([0.45, 0.7])
        bank.route_backward(proj, cache)
        return float(np.sum(filt * proj)), [p.grad.copy() for p in params]
    return _check(f, [p.value for p in params], rng=rng)


def check_adaption(rng):
    blk = _jitter(AdaptionBlock(8, 3, 8, rng, zero_head=False), rng)
    x = rng.normal(size=(1, 8, 5, 6))
    s = ScalePair(1.8, 3.1)
    return _module_check(blk, lambda: blk.forward(x, s), x, x.shape, rng, max_coords=60)


def check_upsampler(rng):
    up = _jitter(ScaleAwareUpsampler(8, 3, 8, rng, zero_head=False), rng)
    up.offset_head.weight.value *= 3
    x = rng.normal(size=(2, 8, 4, 5))
    s = ScalePair(1.5, 2.5)
    return _module_check(up, lambda: up.forward(x, s, (10, 8)), x, (2, 8, 10, 8), rng,
                         max_coords=60)


def check_network(rng):
    cfg = ModelConfig(blocks=2, channels=8, adapt_every=1, experts=2, hidden=16, head_init="random")
    net = _jitter(ArbNet(cfg, seed=int(rng.integers(1 << 30))), rng)
    x = rng.uniform(size=(1, 3, 6, 6))
    s = ScalePair(2.0, 1.5)
    return _module_check(net, lambda: net.forward(x, s, (9, 12)), x, (1, 3, 9, 12), rng,
                         max_coords=8)


CHECKS = (
    ("conv2d", check_conv2d, OP_TOL),
    ("linear", check_linear, OP_TOL),
    ("sigmoid", check_sigmoid, OP_TOL),
    ("relu", check_relu, OP_TOL),
    ("softmax", check_softmax, OP_TOL),
    ("bilinear_sample", check_bilinear, OP_TOL),
    ("route", check_route, OP_TOL),
    ("adaption_block", check_adaption, OP_TOL),
    ("scale_aware_upsample", check_upsampler, OP_TOL),
    ("network", check_network, NET_TOL),
)


def run_all(seed: int = 0) -> list[CheckResult]:
    results = []
    with precision("float64"):
        for name, fn, tol in CHECKS:
            rng = np.random.default_rng([seed, len(results)])
            t = time.perf_counter()
            rep = fn(rng)
            results.append(CheckResult(name, float(rep.max_error), tol, time.perf_counter() - t,
                                       rep.checked, rep.skipped))
    return results


def format_table(results) -> str:
    lines = [f"{'operation':<22} {'max rel err':>12} {'tol':>8} {'checked':>8} {'kinks':>6}  status"]
    for r in results:
        lines.append(f"{r.name:<22} {r.error:>12.3e} {r.tol:>8.0e} {r.checked:>8d} {r.skipped:>6d}"
                     f"  {'ok' if r.ok else 'FAIL'}")
    return "\n".join(lines)
