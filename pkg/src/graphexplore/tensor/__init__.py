from .core import (
    ShapeError,
    Tape,
    Tensor,
    add,
    as_tensor,
    concat,
    embed_lookup,
    exp,
    forward_primitive,
    log,
    matmul,
    mul,
    neg,
    no_grad,
    reduce_max,
    reduce_mean,
    reduce_sum,
    relu,
    reshape,
    segment_aggregate,
    sigmoid,
    slice_,
    softmax,
    sub,
    tanh,
    transpose,
)
from .checkpoint import load_params, save_params
from .gradcheck import grad_check
from .nn import Embedding, GRUCell, Linear, LSTMCell, MLP, ParamSet
from .optim import GradientError, OptimizerState, clip_global_norm, optimizer_step
