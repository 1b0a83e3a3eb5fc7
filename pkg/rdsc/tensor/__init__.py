from .core import (
    DTYPE,
    Graph,
    Node,
    Tensor,
    activation,
    add,
    add_bias,
    add_scalar,
    backward,
    center_spatial,
    clamp_min,
    clip,
    constant,
    exp,
    expand_channels,
    leaky_relu,
    mean,
    mse,
    mul,
    neg,
    parameter,
    record,
    relu,
    round_half_away,
    round_ste,
    scale,
    sigmoid64,
    square,
    sub,
    sum,
)
from .conv import conv2d, conv2d_transpose
from .resample import crop2d, flip, pad2d, resize_bilinear, rot90
