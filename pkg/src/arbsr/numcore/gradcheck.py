"""Central finite-difference gradient checker."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def relative_error(analytic, numeric):
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
    return np.abs(a - n) / denom


def numeric_grad(f, x, h=1e-6, coords=None):
    """Central differences of scalar ``f()`` w.r.t. the array ``x``, in place.

    ``x`` is perturbed and restored coordinate by coordinate.  ``coords``
    restricts the evaluation to a subset of flat indices.
    """
    flat = x.reshape(-1)
    idx = range(flat.size) if coords is None else coords
    out = {}
    for i in idx:
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        out[i] = (fp - fm) / (2 * h)
    return out


@dataclass
class GradCheckReport:
    max_error: float
    checked: int
    skipped: int

    @property
    def skipped_fraction(self) -> float:
        total = self.checked + self.skipped
        return self.skipped / total if total else 0.0


def grad_check_report(func, inputs, h=1e-6, max_coords=None, rng=None,
                      smooth_tol=None) -> GradCheckReport:
    """Compare the analytic gradients of ``func`` with central differences.

    ``func(*inputs)`` must return ``(loss, grads)`` where ``grads`` lines up
    with ``inputs`` (``None`` entries are skipped).  Inputs are float64
    arrays and are perturbed in place.  With ``max_coords`` set, each input
    is checked on a random subset of that many coordinates.

    With ``smooth_tol`` set, every coordinate is also differenced with step
    ``h / 2``; when the two estimates disagree by more than ``smooth_tol``
    (relative) the loss is not smooth enough there to define a reference,
    typically because a ReLU or interpolation kink lies within ``h``, and
    the coordinate is counted as skipped instead of checked.
    """
    if any(np.asarray(x).dtype != np.float64 for x in inputs):
        raise TypeError("grad_check needs float64 inputs")
    rng = rng if rng is not None else np.random.default_rng(0)
    _, grads = func(*inputs)
    grads = [None if g is None else np.array(g, dtype=np.float64) for g in grads]

    def loss():
        return float(func(*inputs)[0])

    worst, checked, skipped = 0.0, 0, 0
    for x, g in zip(inputs, grads):
        if g is None:
            continue
        coords = None
        if max_coords is not None and x.size > max_coords:
            coords = rng.choice(x.size, size=max_coords, replace=False)
        num = numeric_grad(loss, x, h=h, coords=coords)
        keys = np.fromiter(num.keys(), dtype=np.int64)
        ref = np.fromiter(num.values(), dtype=np.float64)
        keep = np.ones(keys.size, dtype=bool)
        if smooth_tol is not None:
            half = numeric_grad(loss, x, h=h / 2, coords=keys)
            keep = relative_error(ref, np.fromiter(half.values(), dtype=np.float64)) <= smooth_tol
        err = relative_error(g.reshape(-1)[keys[keep]], ref[keep])
        worst = max(worst, float(err.max(initial=0.0)))
        checked += int(keep.sum())
        skipped += int((~keep).sum())
    return GradCheckReport(worst, checked, skipped)


def grad_check(func, inputs, h=1e-6, max_coords=None, rng=None, smooth_tol=None) -> float:
    """Maximum relative error of :func:`grad_check_report`."""
    return grad_check_report(func, inputs, h, max_coords, rng, smooth_tol).max_error
