"""Dense float64 tensors with reverse-mode differentiation and Adam."""

from .check import finite_diff_grad, relative_error
from .graph import Graph, Node, as_tensor, backward
from .ops import (
    add, concat, cosine, exp, getitem, l2_normalize, log, logsumexp, matmul, max,
    mean, mean_max_pool, mul, primitive_forward, reshape, scale, sigmoid, softmax,
    stack, sub, sum, tanh, transpose, value_of,
)
from .optim import AdamState, adam_step

__all__ = [
    "AdamState", "Graph", "Node", "add", "adam_step", "as_tensor", "backward", "concat",
    "cosine", "exp", "finite_diff_grad", "getitem", "l2_normalize", "log", "logsumexp",
    "matmul", "max", "mean", "mean_max_pool", "mul", "primitive_forward", "relative_error",
    "reshape", "scale", "sigmoid", "softmax", "stack", "sub", "sum", "tanh", "transpose",
    "value_of",
]
