"""Precision switch and the learnable ``Parameter`` container.

Activations are plain ``numpy`` arrays laid out as ``(N, C, H, W)``.  Only
learnable weights carry gradient and optimizer state, so they live in
:class:`Parameter`.
"""
from __future__ import annotations

import contextlib

import numpy as np

_DTYPES = {"float32": np.float32, "float64": np.float64}
_state = {"dtype": np.float32}


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


def get_dtype():
    return _state["dtype"]


def set_precision(name: str) -> None:
    """Select the build-wide float type: ``"float32"`` or ``"float64"``."""
    try:
        _state["dtype"] = _DTYPES[name]
    except KeyError:
        raise ValueError(f"unknown precision {name!r}; expected one of {sorted(_DTYPES)}") from None


@contextlib.contextmanager
def precision(name: str):
    previous = _state["dtype"]
    set_precision(name)
    try:
        yield
    finally:
        _state["dtype"] = previous


def check_tensor(x: np.ndarray, name: str = "input") -> np.ndarray:
    if x.ndim != 4:
        raise ShapeError(f"{name} must be 4-D (N, C, H, W), got shape {x.shape}")
    if min(x.shape) < 1:
        raise ShapeError(f"{name} has an empty axis: {x.shape}")
    return x


class Parameter:
    """A learnable array with its gradient accumulator and Adam moments."""

    __slots__ = ("value", "grad", "m", "v", "step")

    def __init__(self, value, dtype=None):
        dtype = dtype or get_dtype()
        self.value = np.array(value, dtype=dtype)
        self.grad = np.zeros_like(self.value)
        self.m = np.zeros_like(self.value)
        self.v = np.zeros_like(self.value)
        self.step = 0

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad.fill(0)

    def astype(self, dtype) -> None:
        self.value = self.value.astype(dtype)
        self.grad = self.grad.astype(dtype)
        self.m = self.m.astype(dtype)
        self.v = self.v.astype(dtype)

    def __repr__(self):
        return f"Parameter(shape={self.value.shape}, dtype={self.value.dtype})"
