import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from rdsc.errors import ShapeError
from rdsc.tensor.core import DTYPE, Tensor, record


def conv2d(x: Tensor, w: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """Cross-correlation of x[N,Ci,H,W] with w[Co,Ci,k,k], zero padded."""
    n, ci, h, wd = _check_4d('conv2d', x)
    co, wci, k, k2 = _check_4d('conv2d', w)
    assert stride > 0 and pad >= 0
    if wci != ci or k != k2:
        raise ShapeError(f'conv2d: input {x.shape} does not fit weight {w.shape}')

    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    if ho <= 0 or wo <= 0:
        raise ShapeError(f'conv2d: non-positive output extent for input {x.shape}, kernel {k}, stride {stride}, pad {pad}')

    xp = _pad(x.data, pad)
    cols = _windows(xp, k, stride, ho, wo)
    out = _correlate(cols, w.data)

    def backward(g: np.ndarray):
        gw = np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3])) if w.requires_grad else None
        gx = None
        if x.requires_grad:
            gx = _crop(_scatter(g, w.data, xp.shape, stride), pad)
        return gx, gw

    return record('conv2d', out, (x, w), backward)


def conv2d_transpose(x: Tensor, w: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """Adjoint of `conv2d` sharing the weight: x[N,Ci,H,W], w[Ci,Co,k,k] -> [N,Co,(H-1)*stride-2*pad+k, ...]."""
    n, ci, h, wd = _check_4d('conv2d_transpose', x)
    wci, co, k, k2 = _check_4d('conv2d_transpose', w)
    assert stride > 0 and pad >= 0
    if wci != ci or k != k2:
        raise ShapeError(f'conv2d_transpose: input {x.shape} does not fit weight {w.shape}')

    ho = (h - 1) * stride - 2 * pad + k
    wo = (wd - 1) * stride - 2 * pad + k
    if ho <= 0 or wo <= 0:
        raise ShapeError(f'conv2d_transpose: non-positive output extent for input {x.shape}')

    padded_shape = (n, co, ho + 2 * pad, wo + 2 * pad)
    out = _crop(_scatter(x.data, w.data, padded_shape, stride), pad)

    def backward(g: np.ndarray):
        gp = _pad(g, pad)
        cols = _windows(gp, k, stride, h, wd)
        gx = _correlate(cols, w.data) if x.requires_grad else None
        gw = np.tensordot(x.data, cols, axes=([0, 2, 3], [0, 2, 3])) if w.requires_grad else None
        return gx, gw

    return record('conv2d_transpose', out, (x, w), backward)


def _check_4d(op: str, t: Tensor) -> tuple[int, int, int, int]:
    if t.data.ndim != 4:
        raise ShapeError(f'{op}: expected a 4-d tensor, got shape {t.shape}')
    return t.shape


def _pad(a: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return a
    return np.pad(a, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def _crop(a: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return a
    return a[:, :, pad:-pad, pad:-pad]


def _windows(xp: np.ndarray, k: int, stride: int, ho: int, wo: int) -> np.ndarray:
    # [N,C,Ho,Wo,k,k]
    v = sliding_window_view(xp, (k, k), axis=(2, 3))
    return v[:, :, ::stride, ::stride][:, :, :ho, :wo]


def _correlate(cols: np.ndarray, w: np.ndarray) -> np.ndarray:
    out = np.tensordot(cols, w, axes=([1, 4, 5], [1, 2, 3]))
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2), dtype=DTYPE)


def _scatter(g: np.ndarray, w: np.ndarray, padded_shape: tuple[int, ...], stride: int) -> np.ndarray:
    """Spread g[N,Co,Ho,Wo] back through w[Co,Ci,k,k] onto a zero canvas of `padded_shape`."""
    _, _, ho, wo = g.shape
    k = w.shape[2]
    # [N,Ho,Wo,Ci,k,k]
    contrib = np.tensordot(g, w, axes=([1], [0]))
    canvas = np.zeros(padded_shape, dtype=DTYPE)
    for i in range(k):
        for j in range(k):
            canvas[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += \
                contrib[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return canvas
