"""Differentiable spatial rearrangements over the last two axes of a tensor.

All kernels accept any leading shape (`[N,C,H,W]` batches as well as `[C,H,W]` images).
Bilinear resampling uses half-pixel centers with edge clamping and is evaluated
in `a + w*(b - a)` form, so constant regions stay bitwise constant.
"""
from functools import cache

import numpy as np

from rdsc.errors import ShapeError
from rdsc.tensor.core import DTYPE, Tensor, record


def pad2d(x: Tensor, top: int, bottom: int, left: int, right: int) -> Tensor:
    assert min(top, bottom, left, right) >= 0
    h, w = _spatial(x)
    widths = [(0, 0)] * (x.data.ndim - 2) + [(top, bottom), (left, right)]
    out = np.pad(x.data, widths)
    return record(
        'pad2d',
        out,
        (x,),
        lambda g: (g[..., top:top + h, left:left + w],)
    )


def crop2d(x: Tensor, top: int, left: int, height: int, width: int) -> Tensor:
    h, w = _spatial(x)
    if top < 0 or left < 0 or height <= 0 or width <= 0 or top + height > h or left + width > w:
        raise ShapeError(f'crop2d: window ({top}, {left}, {height}, {width}) does not fit {h}x{w}')
    out = x.data[..., top:top + height, left:left + width]

    def backward(g: np.ndarray):
        gx = np.zeros_like(x.data)
        gx[..., top:top + height, left:left + width] = g
        return gx,

    return record('crop2d', out, (x,), backward)


def rot90(x: Tensor, k: int) -> Tensor:
    """Rotate counter-clockwise by k quarter turns."""
    _spatial(x)
    k = k % 4
    out = np.rot90(x.data, k, axes=(-2, -1))
    return record('rot90', out, (x,), lambda g: (np.rot90(g, -k, axes=(-2, -1)),))


def flip(x: Tensor, axis: int) -> Tensor:
    """Mirror along the spatial axis -1 (horizontal) or -2 (vertical)."""
    assert axis in (-1, -2)
    _spatial(x)
    return record('flip', np.flip(x.data, axis), (x,), lambda g: (np.flip(g, axis),))


def resize_bilinear(x: Tensor, height: int, width: int) -> Tensor:
    h, w = _spatial(x)
    if height <= 0 or width <= 0:
        raise ShapeError(f'resize_bilinear: bad target size {height}x{width}')
    if (h, w) == (height, width):
        return x

    tmp = _lerp(x.data, -2, h, height)
    out = _lerp(tmp, -1, w, width)

    def backward(g: np.ndarray):
        gt = _lerp_adjoint(g, -1, w, width)
        return _lerp_adjoint(gt, -2, h, height),

    return record('resize_bilinear', out, (x,), backward)


def _spatial(x: Tensor) -> tuple[int, int]:
    if x.data.ndim < 2:
        raise ShapeError(f'expected at least 2 spatial axes, got shape {x.shape}')
    return x.shape[-2], x.shape[-1]


@cache
def _taps(src_len: int, dst_len: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pos = (np.arange(dst_len, dtype=np.float64) + 0.5) * (src_len / dst_len) - 0.5
    pos = np.clip(pos, 0, src_len - 1)
    i0 = np.floor(pos).astype(np.int64)
    i1 = np.minimum(i0 + 1, src_len - 1)
    frac = (pos - i0).astype(DTYPE)
    return i0, i1, frac


def _lerp(a: np.ndarray, axis: int, src_len: int, dst_len: int) -> np.ndarray:
    if src_len == dst_len:
        return a
    i0, i1, frac = _taps(src_len, dst_len)
    shape = [1] * a.ndim
    shape[axis] = dst_len
    frac = frac.reshape(shape)
    lo = np.take(a, i0, axis=axis)
    hi = np.take(a, i1, axis=axis)
    return lo + frac * (hi - lo)


def _lerp_adjoint(g: np.ndarray, axis: int, src_len: int, dst_len: int) -> np.ndarray:
    if src_len == dst_len:
        return g
    i0, i1, frac = _taps(src_len, dst_len)
    shape = [1] * g.ndim
    shape[axis] = dst_len
    frac = frac.reshape(shape)
    out = np.zeros((src_len,) + np.moveaxis(g, axis, 0).shape[1:], dtype=np.float64)
    np.add.at(out, i0, np.moveaxis(g * (1 - frac), axis, 0))
    np.add.at(out, i1, np.moveaxis(g * frac, axis, 0))
    return np.moveaxis(out, 0, axis).astype(DTYPE)
