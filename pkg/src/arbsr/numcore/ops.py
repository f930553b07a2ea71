"""Differentiable primitives with explicit forward/backward pairs.

Every forward function returns ``(output, cache)``; the matching
``*_backward`` takes the upstream gradient and that cache and returns the
gradients of the inputs in argument order.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import sparse

from .tensor import ShapeError, check_tensor


# ---------------------------------------------------------------------------
# convolution


def _check_conv(x, weight, padding):
    check_tensor(x)
    if weight.ndim != 4 or weight.shape[2] != weight.shape[3]:
        raise ShapeError(f"kernel must be C_out x C_in x k x k, got {weight.shape}")
    if x.shape[1] != weight.shape[1]:
        raise ShapeError(f"channel mismatch: input has {x.shape[1]}, kernel expects {weight.shape[1]}")
    k = weight.shape[2]
    if k > x.shape[2] + 2 * padding or k > x.shape[3] + 2 * padding:
        raise ShapeError(f"kernel size {k} exceeds padded input {x.shape[2:]} (padding={padding})")


def _pad(x, padding):
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _patches(xp, k, stride):
    """Patch matrix of shape (N*H_out*W_out, C*k*k), rows in (n, i, j) order."""
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    n, c, h_out, w_out = win.shape[:4]
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(n * h_out * w_out, c * k * k), (h_out, w_out)


def conv2d(x, weight, bias=None, padding=0, stride=1, method="im2col"):
    """Cross-correlate ``x`` (N, C_in, H, W) with ``weight`` (C_out, C_in, k, k).

    Output size per axis is ``(H + 2*padding - k) // stride + 1``.
    ``method="direct"`` runs the plain per-pixel loop and exists as a
    correctness reference for the patch-matrix path; it is slow.
    """
    _check_conv(x, weight, padding)
    c_out, _, k, _ = weight.shape
    xp = _pad(x, padding)
    cols = None
    if method == "direct":
        out = _conv2d_direct(xp, weight, stride)
        if bias is not None:
            out += bias.reshape(1, -1, 1, 1)
    elif method == "im2col":
        cols, (h_out, w_out) = _patches(xp, k, stride)
        out = cols @ weight.reshape(c_out, -1).T
        if bias is not None:
            out += bias
        out = out.reshape(x.shape[0], h_out, w_out, c_out).transpose(0, 3, 1, 2)
    else:
        raise ValueError(f"unknown conv method {method!r}")
    out = np.ascontiguousarray(out)
    return out, (x.shape, xp.shape, cols, xp, weight, padding, stride, bias is not None)


def _conv2d_direct(xp, weight, stride):
    n, _, hp, wp = xp.shape
    c_out, _, k, _ = weight.shape
    h_out = (hp - k) // stride + 1
    w_out = (wp - k) // stride + 1
    out = np.zeros((n, c_out, h_out, w_out), dtype=np.result_type(xp, weight))
    for b in range(n):
        for o in range(c_out):
            for i in range(h_out):
                for j in range(w_out):
                    patch = xp[b, :, i * stride:i * stride + k, j * stride:j * stride + k]
                    out[b, o, i, j] = np.sum(patch * weight[o])
    return out


def conv2d_backward(dout, cache):
    x_shape, xp_shape, cols, xp, weight, padding, stride, has_bias = cache
    c_out, c_in, k, _ = weight.shape
    n, _, h_out, w_out = dout.shape
    if cols is None:
        cols, _ = _patches(xp, k, stride)
    dmat = dout.transpose(0, 2, 3, 1).reshape(-1, c_out)
    dweight = (dmat.T @ cols).reshape(weight.shape)
    dbias = dmat.sum(axis=0) if has_bias else None
    dcols = (dmat @ weight.reshape(c_out, -1)).reshape(n, h_out, w_out, c_in, k, k)
    # accumulate channels-last, transpose once at the end
    dxp = np.zeros((n, xp_shape[2], xp_shape[3], c_in), dtype=dcols.dtype)
    for i in range(k):
        for j in range(k):
            dxp[:, i:i + stride * h_out:stride, j:j + stride * w_out:stride, :] += dcols[..., i, j]
    h, w = x_shape[2], x_shape[3]
    dx = dxp[:, padding:padding + h, padding:padding + w, :].transpose(0, 3, 1, 2)
    return np.ascontiguousarray(dx), dweight, dbias


# ---------------------------------------------------------------------------
# affine


def linear(x, weight, bias=None):
    """Affine map on the last axis: ``x @ weight.T + bias``.

    ``x`` may be a single vector or a stack of row vectors.
    """
    x = np.asarray(x)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[1]:
        raise ShapeError(f"input width {x.shape[-1]} does not match weight {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ShapeError(f"bias shape {bias.shape} does not match output width {weight.shape[0]}")
    out = x @ weight.T
    if bias is not None:
        out = out + bias
    return out, (x, weight, bias is not None)


def linear_backward(dout, cache):
    x, weight, has_bias = cache
    dx = dout @ weight
    x2 = x.reshape(-1, x.shape[-1])
    d2 = dout.reshape(-1, dout.shape[-1])
    dweight = d2.T @ x2
    dbias = d2.sum(axis=0) if has_bias else None
    return dx, dweight, dbias


# ---------------------------------------------------------------------------
# pointwise


def sigmoid(x):
    x = np.asarray(x)
    out = np.empty_like(x, dtype=np.result_type(x, np.float32))
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out, out


def sigmoid_backward(dout, cache):
    s = cache
    return dout * s * (1.0 - s)


def relu(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(dout, cache):
    return dout * cache


def tanh(x):
    out = np.tanh(x)
    return out, out


def tanh_backward(dout, cache):
    return dout * (1.0 - cache * cache)


def _check_binary(a, b):
    if a.shape == b.shape:
        return False
    if (
        a.ndim == 4 and b.ndim == 4 and b.shape[1] == 1
        and a.shape[0] == b.shape[0] and a.shape[2:] == b.shape[2:]
    ):
        return True
    raise ShapeError(
        f"cannot combine shapes {a.shape} and {b.shape}; only a 1-channel map may broadcast over C"
    )


def add(a, b):
    """Sum of equal shapes, or ``b`` a 1-channel map broadcast over channels."""
    broadcast = _check_binary(a, b)
    return a + b, broadcast


def add_backward(dout, cache):
    broadcast = cache
    db = dout.sum(axis=1, keepdims=True) if broadcast else dout
    return dout, db


def mul(a, b):
    broadcast = _check_binary(a, b)
    return a * b, (a, b, broadcast)


def mul_backward(dout, cache):
    a, b, broadcast = cache
    da = dout * b
    db = dout * a
    if broadcast:
        db = db.sum(axis=1, keepdims=True)
    return da, db


def scale(x, factor):
    return x * factor, factor


def scale_backward(dout, cache):
    return dout * cache


# ---------------------------------------------------------------------------
# resampling


def upsample_nearest(x, factor, size=None):
    """Repeat pixels ``factor`` times per axis, then crop to ``size`` (H, W)."""
    out = x.repeat(factor, axis=2).repeat(factor, axis=3)
    if size is not None:
        out = out[:, :, :size[0], :size[1]]
    return np.ascontiguousarray(out), (x.shape, factor)


def upsample_nearest_backward(dout, cache):
    shape, factor = cache
    n, c, h, w = shape
    full = np.zeros((n, c, h * factor, w * factor), dtype=dout.dtype)
    full[:, :, :dout.shape[2], :dout.shape[3]] = dout
    return full.reshape(n, c, h, factor, w, factor).sum(axis=(3, 5))


class BilinearSampler:
    """Bilinear read-out of an H x W grid at a fixed set of real coordinates.

    Coordinates are in pixel units (pixel centres at integers) and are
    clamped to ``[0, W-1] x [0, H-1]``.  The sampler is a sparse linear map
    from the ``H*W`` pixels to the ``P`` query points, plus two more sparse
    maps holding the derivative of each sample with respect to ``x`` and
    ``y``.
    """

    def __init__(self, height: int, width: int, x, y, dtype=np.float64):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        x, y = np.broadcast_arrays(x, y)
        self.query_shape = x.shape
        self.height, self.width = height, width
        xs, ys = x.ravel(), y.ravel()
        xc = np.clip(xs, 0.0, width - 1)
        yc = np.clip(ys, 0.0, height - 1)
        # Outside the image the clamp makes a sample constant in that coordinate.
        self.mask_x = ((xs > 0) & (xs < width - 1)).astype(dtype)
        self.mask_y = ((ys > 0) & (ys < height - 1)).astype(dtype)
        x0 = np.minimum(np.floor(xc), max(width - 2, 0)).astype(np.int64)
        y0 = np.minimum(np.floor(yc), max(height - 2, 0)).astype(np.int64)
        x1 = np.minimum(x0 + 1, width - 1)
        y1 = np.minimum(y0 + 1, height - 1)
        fx = xc - x0
        fy = yc - y0
        p = xs.size
        rows = np.tile(np.arange(p), 4)
        cols = np.concatenate([y0 * width + x0, y0 * width + x1, y1 * width + x0, y1 * width + x1])
        shape = (p, height * width)

        def op(vals):
            return sparse.csr_matrix((np.concatenate(vals).astype(dtype), (rows, cols)), shape=shape)

        self.weights = op([(1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx])
        self.d_dx = op([-(1 - fy), (1 - fy), -fy, fy])
        self.d_dy = op([-(1 - fx), -fx, (1 - fx), fx])

    @property
    def num_points(self) -> int:
        return self.weights.shape[0]

    def sample_columns(self, cols):
        """``cols`` is (H*W, K); returns (P, K)."""
        return self.weights @ cols

    def backward_columns(self, dout, cols):
        """Gradients for ``sample_columns``: (d cols, d x, d y) with dx, dy of shape (P,)."""
        dcols = self.weights.T @ dout
        dx = np.einsum("pk,pk->p", self.d_dx @ cols, dout) * self.mask_x
        dy = np.einsum("pk,pk->p", self.d_dy @ cols, dout) * self.mask_y
        return dcols, dx, dy


def bilinear_sample(img, x, y):
    """Sample ``img`` (N, C, H, W) at real coordinates ``x``, ``y``.

    ``x`` and ``y`` broadcast to a common shape ``S``; the result has shape
    ``(N, C) + S``.  Scalars give an (N, C) vector.
    """
    check_tensor(img)
    n, c, h, w = img.shape
    sampler = BilinearSampler(h, w, x, y, dtype=img.dtype)
    cols = img.reshape(n * c, h * w).T
    out = np.asarray(sampler.sample_columns(cols)).T
    return out.reshape((n, c) + sampler.query_shape), (sampler, cols, img.shape)


def bilinear_sample_backward(dout, cache):
    sampler, cols, shape = cache
    n, c, h, w = shape
    d = dout.reshape(n * c, -1).T
    dcols, dx, dy = sampler.backward_columns(d, cols)
    dimg = np.asarray(dcols).T.reshape(shape)
    return dimg, dx.reshape(sampler.query_shape), dy.reshape(sampler.query_shape)


def pixel_shuffle(x, r: int):
    """Rearrange (N, r*r*C, H, W) into (N, C, r*H, r*W)."""
    check_tensor(x)
    n, c, h, w = x.shape
    if c % (r * r):
        raise ShapeError(f"channel count {c} is not divisible by r^2 = {r * r}")
    c_out = c // (r * r)
    out = x.reshape(n, c_out, r, r, h, w).transpose(0, 1, 4, 2, 5, 3)
    return np.ascontiguousarray(out.reshape(n, c_out, h * r, w * r))


def pixel_unshuffle(x, r: int):
    """Exact inverse of :func:`pixel_shuffle`."""
    check_tensor(x)
    n, c, hr, wr = x.shape
    if hr % r or wr % r:
        raise ShapeError(f"spatial size {x.shape[2:]} is not divisible by r = {r}")
    h, w = hr // r, wr // r
    out = x.reshape(n, c, h, r, w, r).transpose(0, 1, 3, 5, 2, 4)
    return np.ascontiguousarray(out.reshape(n, c * r * r, h, w))


def pixel_shuffle_backward(dout, r: int):
    return pixel_unshuffle(dout, r)


# ---------------------------------------------------------------------------
# normalisation and loss


def softmax(v):
    """Softmax over the last axis with max-subtraction."""
    v = np.asarray(v)
    z = v - v.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)
    return out, out


def softmax_backward(dout, cache):
    s = cache
    return s * (dout - np.sum(dout * s, axis=-1, keepdims=True))


def l1_loss(pred, target):
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} and target {target.shape} differ in shape")
    diff = pred - target
    return float(np.mean(np.abs(diff))), (np.sign(diff), diff.size)


def l1_loss_backward(cache, dout=1.0):
    sign, count = cache
    return sign * (dout / count)
