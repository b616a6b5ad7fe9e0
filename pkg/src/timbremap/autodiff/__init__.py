"""Minimal reverse-mode autodiff over numpy arrays.

Exactly the differentiable operations the two networks and the seven loss
terms need; everything is verified against central finite differences by
:mod:`timbremap.autodiff.gradcheck`.
"""

from .tensor import (
    Tensor,
    ParameterStore,
    ShapeError,
    no_grad,
    constant,
    parameter,
    add,
    sub,
    mul,
    neg,
    exp,
    log,
    sqrt,
    maximum_scalar,
    clip,
    relu,
    gelu,
    tanh,
    activation,
    matmul,
    dense,
    conv1d,
    conv1d_transpose,
    conv_output_length,
    softmax,
    layer_norm,
    concat,
    reshape,
    transpose,
    slice_axis,
    embedding,
    attention,
    sum_all,
    sum_axis,
    mean_all,
    mse,
    cross_entropy,
    l2_norm_last,
    pairwise_sqdist,
    backward,
)
from .gradcheck import GradCheckFailure, GradCheckReport, check_gradients
from .optim import Adam, GradientNaNError

__all__ = [
    "Tensor",
    "ParameterStore",
    "ShapeError",
    "no_grad",
    "constant",
    "parameter",
    "add",
    "sub",
    "mul",
    "neg",
    "exp",
    "log",
    "sqrt",
    "maximum_scalar",
    "clip",
    "relu",
    "gelu",
    "tanh",
    "activation",
    "matmul",
    "dense",
    "conv1d",
    "conv1d_transpose",
    "conv_output_length",
    "softmax",
    "layer_norm",
    "concat",
    "reshape",
    "transpose",
    "slice_axis",
    "embedding",
    "attention",
    "sum_all",
    "sum_axis",
    "mean_all",
    "mse",
    "cross_entropy",
    "l2_norm_last",
    "pairwise_sqdist",
    "backward",
    "GradCheckFailure",
    "GradCheckReport",
    "check_gradients",
    "Adam",
    "GradientNaNError",
]
