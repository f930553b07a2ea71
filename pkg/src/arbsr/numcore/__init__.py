"""Dense-tensor kernels with hand-written backward passes."""
from .gradcheck import GradCheckReport, grad_check, grad_check_report, numeric_grad, relative_error
from .ops import (
    BilinearSampler,
    add,
    add_backward,
    bilinear_sample,
    bilinear_sample_backward,
    conv2d,
    conv2d_backward,
    l1_loss,
    l1_loss_backward,
    linear,
    linear_backward,
    mul,
    mul_backward,
    pixel_shuffle,
    pixel_shuffle_backward,
    pixel_unshuffle,
    relu,
    relu_backward,
    scale,
    scale_backward,
    sigmoid,
    sigmoid_backward,
    softmax,
    softmax_backward,
    tanh,
    tanh_backward,
    upsample_nearest,
    upsample_nearest_backward,
)
from .optim import adam_step, clip_grad_norm, global_grad_norm, zero_grad
from .tensor import Parameter, ShapeError, check_tensor, get_dtype, precision, set_precision

# the affine op under its descriptive name
fully_connected = linear
fully_connected_backward = linear_backward

__all__ = [
    "BilinearSampler", "Parameter", "ShapeError", "adam_step", "add", "add_backward",
    "bilinear_sample", "bilinear_sample_backward", "check_tensor", "clip_grad_norm",
    "conv2d", "conv2d_backward", "fully_connected", "fully_connected_backward",
    "get_dtype", "global_grad_norm", "grad_check", "l1_loss", "l1_loss_backward",
    "linear", "linear_backward", "mul", "mul_backward", "numeric_grad", "pixel_shuffle",
    "pixel_shuffle_backward", "pixel_unshuffle", "precision", "relative_error", "relu",
    "relu_backward", "scale", "scale_backward", "set_precision", "sigmoid",
    "sigmoid_backward", "softmax", "softmax_backward", "tanh", "tanh_backward",
    "upsample_nearest", "upsample_nearest_backward", "zero_grad",
]
