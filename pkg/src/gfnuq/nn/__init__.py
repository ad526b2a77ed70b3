"""Small float64 neural-network toolkit: tape autograd, dense nets, GRU, Adam."""

from .autograd import (
    Tensor,
    backward,
    concat,
    log_sigmoid,
    log_softmax,
    logsumexp,
    matmul,
    parameter,
    softmax,
    softplus,
    stack,
    where,
)
from .dense import DenseLayer, DenseNet, forward, glorot_uniform
from .gradcheck import check_gradients, relative_error
from .optim import AdamState, adam_step
from .recurrent import RecurrentEncoder, encode_sequence

__all__ = [
    "AdamState",
    "DenseLayer",
    "DenseNet",
    "RecurrentEncoder",
    "Tensor",
    "adam_step",
    "backward",
    "check_gradients",
    "concat",
    "encode_sequence",
    "forward",
    "glorot_uniform",
    "log_sigmoid",
    "log_softmax",
    "logsumexp",
    "matmul",
    "parameter",
    "relative_error",
    "softmax",
    "softplus",
    "stack",
    "where",
]
