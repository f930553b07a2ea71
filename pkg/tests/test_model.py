from fractions import Fraction

import numpy as np
import pytest

from arbsr import numcore as nc
from arbsr.model import (
    AdaptionBlock,
    ArbNet,
    ConfigError,
    ExpertBank,
    ModelConfig,
    ScaleAwareConv,
    ScaleAwareUpsampler,
    build_grid,
    project,
)
from arbsr.numcore import grad_check
from arbsr.scale import ScalePair

TINY = ModelConfig(blocks=2, channels=8, adapt_every=1, experts=2, hidden=16, head_init="random")


def loss_and_grads(module_forward, module_backward, params, proj, inputs=()):
    """Wrap a layer into grad_check form: loss = sum(out * proj)."""
    def f(*arrays):
        for p in params:
            p.zero_grad()
        out, cache = module_forward()
        dx = module_backward(proj, cache)
        grads = [p.grad.copy() for p in params]
        extra = [dx] if inputs else []
        return float(np.sum(out * proj)), extra + grads
    return f


def jitter(module, rng):
    """Nonzero biases so no ReLU input sits exactly on the kink."""
    for name, p in module.named_parameters():
        if name.endswith("bias"):
            p.value[:] = rng.normal(scale=0.1, size=p.shape)
    return module


# --- grid ---------------------------------------------------------------------

def test_grid_identity_scale():
    lx, rx = project(np.arange(20), 1.0)
    np.testing.assert_array_equal(lx, np.arange(20))
    np.testing.assert_array_equal(rx, 0.0)


@pytest.mark.parametrize("x,l,r", [(3, 1.25, 0.25), (2, 0.75, -0.25)])
def test_grid_worked_examples(x, l, r):
    lx, rx = project(x, 2.0)
    assert lx == l and rx == r


def test_grid_matches_rational_oracle():
    for r in (1, Fraction(3, 2), 2, Fraction(51, 20), 3, Fraction(39, 10), 4):
        xs = np.arange(512)
        lx, rx = project(xs, float(r))
        for x in range(0, 512, 7):
            t = (Fraction(x) + Fraction(1, 2)) / r
            L = t - Fraction(1, 2)
            R = L - (t.numerator // t.denominator)
            assert abs(lx[x] - float(L)) < 1e-12
            assert abs(rx[x] - float(R)) < 1e-12


def test_build_grid_sizes_and_ratio():
    g = build_grid(100, 100, 420, 220)
    assert g.shape == (420, 220)
    assert g.r_h == 2.2 and g.r_v == 4.2
    with pytest.raises(ValueError):
        build_grid(0, 4, 8, 8)


def test_integer_scale_reproduces_pixel_shuffle_assignment():
    g = build_grid(128, 128, 256, 256)
    bx, _ = g.base_index()
    np.testing.assert_array_equal(bx, np.arange(256) // 2)
    np.testing.assert_array_equal(g.rx, np.tile([-0.25, 0.25], 128))


# --- routing ------------------------------------------------------------------

def make_bank(rng, e=4, c=3):
    return ExpertBank((c, c, 3, 3), e, 2, 8, rng, c * 9, zero_head=False)


def test_route_one_hot_selects_expert(f64, rng):
    bank = make_bank(rng)
    fc2 = bank.controller.fc2
    fc2.weight.value[:] = 0
    fc2.bias.value[:] = [-1e4, 1e4, -1e4, -1e4]
    w, filt, _ = bank.route([0.5, 0.5])
    np.testing.assert_array_equal(filt, bank.experts.value[1])
    assert w[1] == 1.0


def test_route_uniform_is_mean(f64, rng):
    bank = ExpertBank((3, 3, 3, 3), 4, 2, 8, rng, 27, zero_head=True)
    w, filt, _ = bank.route([0.3, 0.9])
    np.testing.assert_array_equal(w, 0.25)
    np.testing.assert_allclose(filt, bank.experts.value.mean(axis=0), atol=1e-15)


def test_route_single_expert_ignores_conditioning(f64, rng):
    bank = make_bank(rng, e=1)
    for cond in ([0.25, 0.25], [1.0, 0.3]):
        w, filt, _ = bank.route(cond)
        np.testing.assert_array_equal(filt, bank.experts.value[0])


def test_route_gradcheck(f64, rng):
    bank = make_bank(rng, e=3, c=2)
    proj = rng.normal(size=(2, 2, 3, 3))

    def fwd():
        w, filt, cache = bank.route([0.4, 0.7])
        return filt, cache
    params = bank.parameters()
    f = loss_and_grads(fwd, lambda d, c: bank.route_backward(d, c), params, proj)
    assert grad_check(f, [p.value for p in params]) < 1e-4


# --- scale-aware conv / adaption ----------------------------------------------

def test_scale_aware_conv_scale_sensitivity(f64, rng):
    sac = ScaleAwareConv(4, 4, 16, rng, zero_head=False)
    x = rng.normal(size=(1, 4, 6, 6))
    a, _ = sac.forward(x, ScalePair(1.5, 1.5))
    b, _ = sac.forward(x, ScalePair(4.0, 1.2))
    assert a.shape == x.shape
    assert np.max(np.abs(a - b)) > 1e-6


def test_scale_aware_conv_single_expert_invariant(f64, rng):
    sac = ScaleAwareConv(4, 1, 16, rng, zero_head=False)
    x = rng.normal(size=(1, 4, 6, 6))
    a, _ = sac.forward(x, ScalePair(1.5, 1.5))
    b, _ = sac.forward(x, ScalePair(4.0, 1.2))
    np.testing.assert_array_equal(a, b)


def test_scale_aware_conv_gradcheck(f64, rng):
    sac = jitter(ScaleAwareConv(3, 3, 8, rng, zero_head=False), rng)
    x = rng.normal(size=(1, 3, 5, 5))
    proj = rng.normal(size=x.shape)
    s = ScalePair(2.3, 1.7)
    params = sac.parameters()
    f = loss_and_grads(lambda: sac.forward(x, s), sac.backward, params, proj, inputs=[x])
    assert grad_check(f, [x] + [p.value for p in params]) < 1e-4


def test_adaption_gate_closed_is_identity(f64, rng):
    blk = AdaptionBlock(8, 2, 8, rng, zero_head=False)
    blk.hourglass.conv4.bias.value[:] = -1e4
    x = rng.normal(size=(1, 8, 6, 6))
    out, _ = blk.forward(x, ScalePair(2, 2))
    np.testing.assert_array_equal(out, x)


def test_adaption_gate_open_adds_adapted(f64, rng):
    blk = AdaptionBlock(8, 2, 8, rng, zero_head=False)
    blk.hourglass.conv4.bias.value[:] = 1e4
    x = rng.normal(size=(1, 8, 6, 6))
    s = ScalePair(2, 3)
    out, _ = blk.forward(x, s)
    adapt, _ = blk.conv.forward(x, s)
    np.testing.assert_allclose(out, x + adapt, atol=1e-14)


def test_fuse_arithmetic():
    f = np.ones((1, 1, 1, 1))
    adapt = np.full((1, 1, 1, 1), 0.5)
    m = np.full((1, 1, 1, 1), 0.5)
    gated, _ = nc.mul(adapt, m)
    assert float((f + gated)[0, 0, 0, 0]) == 1.25


def test_guidance_in_open_interval(rng):
    blk = AdaptionBlock(8, 2, 8, rng)
    x = rng.normal(size=(2, 8, 7, 9)).astype(np.float32)
    _, cache = blk.forward(x, ScalePair(2, 2))
    m = AdaptionBlock.guidance_map(cache)
    assert m.shape == (2, 1, 7, 9)
    assert np.all((m > 0) & (m < 1))


def test_adaption_gradcheck(f64, rng):
    blk = jitter(AdaptionBlock(8, 2, 8, rng, zero_head=False), rng)
    x = rng.normal(size=(1, 8, 5, 6))
    proj = rng.normal(size=x.shape)
    s = ScalePair(1.8, 3.1)
    params = blk.parameters()
    f = loss_and_grads(lambda: blk.forward(x, s), blk.backward, params, proj, inputs=[x])
    assert grad_check(f, [x] + [p.value for p in params], max_coords=40) < 1e-4


# --- upsampler ----------------------------------------------------------------

def identity_upsampler(rng):
    up = ScaleAwareUpsampler(8, 4, 16, rng, zero_head=True)
    up.bottleneck.value[:] = 0
    up.bottleneck.value[:, 0, 0] = 1.0
    up.expansion.value[:] = 1.0
    return up


def bilinear_ramp_oracle(n_cols, out_hw, slope, offset):
    h_out, w_out = out_hw
    lx = (np.arange(w_out) + 0.5) * n_cols / w_out - 0.5
    row = slope * np.clip(lx, 0, n_cols - 1) + offset
    return np.broadcast_to(row, (h_out, w_out))


@pytest.mark.parametrize("scale", [(2, 2), (1.7, 1.7), (2.2, 4.2)])
def test_upsampler_identity_configuration_is_bilinear(f64, rng, scale):
    up = identity_upsampler(rng)
    h, w = 10, 10
    ramp = 0.3 * np.arange(w) + 1.0
    x = np.broadcast_to(ramp, (1, 8, h, w)).copy()
    s = ScalePair(*scale)
    out_hw = (round(h * s.r_v), round(w * s.r_h))
    out, _ = up.forward(x, s, out_hw)
    assert out.shape == (1, 8) + out_hw
    oracle = bilinear_ramp_oracle(w, out_hw, 0.3, 1.0)
    for c in range(8):
        assert np.max(np.abs(out[0, c] - oracle)) < 1e-6


def test_upsampler_exact_asymmetric_size(rng):
    up = ScaleAwareUpsampler(8, 4, 16, rng)
    out, _ = up.forward(rng.normal(size=(1, 8, 100, 100)).astype(np.float32), ScalePair(2.2, 4.2), (420, 220))
    assert out.shape == (1, 8, 420, 220)


def test_upsampler_rejects_bad_channels():
    with pytest.raises(ConfigError):
        ModelConfig(channels=12)


def test_upsampler_gradcheck(f64, rng):
    up = jitter(ScaleAwareUpsampler(8, 2, 8, rng, zero_head=False), rng)
    # larger offsets so the coordinate path is exercised
    up.offset_head.weight.value *= 3
    x = rng.normal(size=(2, 8, 4, 5))
    s = ScalePair(1.5, 2.5)
    out_hw = (10, 8)
    proj = rng.normal(size=(2, 8) + out_hw)
    params = up.parameters()
    f = loss_and_grads(lambda: up.forward(x, s, out_hw), up.backward, params, proj, inputs=[x])
    assert grad_check(f, [x] + [p.value for p in params], max_coords=40) < 1e-4


# --- network ------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(blocks=3, adapt_every=2)
    with pytest.raises(ConfigError):
        ModelConfig(kernel_size=3)
    with pytest.raises(ConfigError):
        ModelConfig(upsampler="nearest")


@pytest.mark.parametrize("scale", [(2, 2), (1.5, 1.5), (2.2, 3.7), (3.9, 1.3)])
def test_network_output_size(rng, scale):
    net = ArbNet(ModelConfig(blocks=2, channels=8, adapt_every=1, experts=2, hidden=8))
    x = rng.uniform(size=(1, 3, 10, 12)).astype(np.float32)
    out = net.predict(x, scale=scale)
    s = ScalePair(*scale)
    assert out.shape == (1, 3, round(10 * s.r_v), round(12 * s.r_h))


def test_network_predict_by_size(rng):
    net = ArbNet(ModelConfig(blocks=2, channels=8, adapt_every=1, experts=2, hidden=8))
    out = net.predict(rng.uniform(size=(1, 3, 10, 10)).astype(np.float32), size=(37, 22))
    assert out.shape == (1, 3, 37, 22)


def test_network_warns_outside_trained_range(rng):
    net = ArbNet(ModelConfig(blocks=2, channels=8, adapt_every=1, experts=2, hidden=8))
    with pytest.warns(RuntimeWarning, match="trained range"):
        net.predict(rng.uniform(size=(1, 3, 4, 4)).astype(np.float32), scale=5)


def test_network_end_to_end_gradcheck(f64):
    rng = np.random.default_rng(7)
    net = jitter(ArbNet(TINY, seed=3), rng)
    x = rng.uniform(size=(1, 3, 6, 6))
    s = ScalePair(2.0, 1.5)
    out_hw = (9, 12)
    proj = rng.normal(size=(1, 3) + out_hw)
    params = net.parameters()
    f = loss_and_grads(lambda: net.forward(x, s, out_hw), net.backward, params, proj, inputs=[x])
    assert grad_check(f, [x] + [p.value for p in params], max_coords=8) < 1e-3


def test_network_finite_on_random_inputs():
    rng = np.random.default_rng(0)
    net = ArbNet(ModelConfig(blocks=2, channels=8, adapt_every=1, experts=2, hidden=8))
    x = rng.uniform(size=(1000, 3, 4, 4)).astype(np.float32)
    out, _ = net.forward(x, ScalePair(2.5, 1.5), (6, 10))
    assert np.all(np.isfinite(out))


def test_scale_invariance_without_conditioning(f64, rng):
    cfg = ModelConfig(blocks=2, channels=8, adapt_every=1, experts=1, hidden=8)
    net = ArbNet(cfg, seed=1)
    x = rng.uniform(size=(1, 3, 6, 6))
    a, _ = net.forward(x, ScalePair(2.0, 2.0), (12, 12))
    b, _ = net.forward(x, ScalePair(3.5, 1.1), (12, 12))
    np.testing.assert_array_equal(a, b)


def test_routing_on_simplex(rng):
    net = ArbNet(TINY.replace(experts=4))
    for s in [(1.1, 1.1), (4.0, 1.5), (2.5, 3.3)]:
        for w in net.routing_weights(s):
            assert np.all(w >= 0) and abs(w.sum() - 1) < 1e-6


def test_no_dead_parameters(rng):
    net = ArbNet(TINY, seed=2)
    before = {k: v.copy() for k, v in net.state_dict().items()}
    x = rng.uniform(size=(2, 3, 8, 8)).astype(np.float32)
    y = rng.uniform(size=(2, 3, 16, 12)).astype(np.float32)
    out, cache = net.forward(x, ScalePair(1.5, 2.0), (16, 12))
    _, lc = nc.l1_loss(out, y)
    net.backward(nc.l1_loss_backward(lc), cache)
    nc.adam_step(net.parameters(), 1e-3)
    for name, value in net.state_dict().items():
        assert not np.array_equal(value, before[name]), name


def test_zero_init_routing_is_uniform():
    net = ArbNet(ModelConfig(experts=4))
    for w in net.routing_weights((3.0, 1.5)):
        np.testing.assert_array_equal(w, 0.25)


def test_bicubic_head_variant_runs(rng):
    net = ArbNet(ModelConfig(blocks=2, channels=8, adapt_every=1, upsampler="bicubic", adaption=False))
    assert not any(name.startswith("upsampler") for name, _ in net.named_parameters())
    out = net.predict(rng.uniform(size=(1, 3, 5, 5)).astype(np.float32), scale=(1.7, 2.3))
    assert out.shape == (1, 3, 12, 9)


def test_bicubic_head_gradcheck(f64, rng):
    net = ArbNet(ModelConfig(blocks=1, channels=8, adapt_every=1, upsampler="bicubic",
                             adaption=False), seed=5)
    jitter(net, rng)
    x = rng.uniform(size=(1, 3, 5, 5))
    proj = rng.normal(size=(1, 3, 8, 7))
    params = net.parameters()
    f = loss_and_grads(lambda: net.forward(x, ScalePair(1.4, 1.6), (8, 7)), net.backward,
                       params, proj, inputs=[x])
    assert grad_check(f, [x] + [p.value for p in params], max_coords=10) < 1e-4
