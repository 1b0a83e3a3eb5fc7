import numpy as np

from rdsc.errors import TransformError
from rdsc.tensor import Tensor, crop2d, flip, pad2d, resize_bilinear, rot90
from rdsc.transforms.descriptor import TransformDescriptor


def _forward_dihedral(x: Tensor, d: int) -> Tensor:
    if d == 0:
        return x
    if d <= 3:
        return rot90(x, d)
    if d == 4:
        return flip(x, -1)
    if d == 5:
        return flip(x, -2)
    if d == 6:
        return flip(rot90(x, 1), -1)
    if d == 7:
        return flip(rot90(x, 1), -2)
    raise TransformError(f'invalid dihedral index - {d}')


def _inverse_dihedral(x: Tensor, d: int) -> Tensor:
    if d == 0:
        return x
    if d <= 3:
        return rot90(x, -d)
    if d == 4:
        return flip(x, -1)
    if d == 5:
        return flip(x, -2)
    if d == 6:
        return rot90(flip(x, -1), -1)
    if d == 7:
        return rot90(flip(x, -2), -1)
    raise TransformError(f'invalid dihedral index - {d}')


def _swaps_axes(d: int) -> bool:
    return d in (1, 3, 6, 7)


def transformed_dims(desc: TransformDescriptor, height: int, width: int) -> tuple[int, int]:
    if _swaps_axes(desc.dihedral):
        height, width = width, height
    return height + desc.sy + desc.ty, width + desc.sx + desc.tx


def apply_tensor(desc: TransformDescriptor, x: Tensor) -> Tensor:
    """Dihedral, then bilinear stretch, then top/left zero shift. Works on [..., H, W]."""
    desc.validate()
    if desc.is_identity():
        return x
    x = _forward_dihedral(x, desc.dihedral)
    if desc.sx or desc.sy:
        h, w = x.shape[-2:]
        x = resize_bilinear(x, h + desc.sy, w + desc.sx)
    if desc.tx or desc.ty:
        x = pad2d(x, desc.ty, 0, desc.tx, 0)
    return x


def invert_tensor(desc: TransformDescriptor, x: Tensor, orig_dims: tuple[int, int] | None = None) -> Tensor:
    desc.validate()
    h, w = x.shape[-2:]
    ph = h - desc.ty - desc.sy
    pw = w - desc.tx - desc.sx
    if ph <= 0 or pw <= 0:
        raise TransformError(f'{h}x{w} image can not be produced by {desc.describe()}')
    if orig_dims is not None:
        expected = transformed_dims(desc, *orig_dims)
        if expected != (h, w):
            raise TransformError(
                f'{h}x{w} image is inconsistent with {desc.describe()} '
                f'applied to {orig_dims[0]}x{orig_dims[1]}'
            )
    if desc.is_identity():
        return x
    if desc.tx or desc.ty:
        x = crop2d(x, desc.ty, desc.tx, ph + desc.sy, pw + desc.sx)
    if desc.sx or desc.sy:
        x = resize_bilinear(x, ph, pw)
    return _inverse_dihedral(x, desc.dihedral)


def apply(desc: TransformDescriptor, pixels: np.ndarray) -> np.ndarray:
    """HWC image in, HWC image out."""
    out = apply_tensor(desc, Tensor(np.moveaxis(pixels, 2, 0)))
    return np.ascontiguousarray(np.moveaxis(out.data, 0, 2))


def invert(desc: TransformDescriptor, pixels: np.ndarray, orig_dims: tuple[int, int] | None = None) -> np.ndarray:
    out = invert_tensor(desc, Tensor(np.moveaxis(pixels, 2, 0)), orig_dims)
    return np.ascontiguousarray(np.moveaxis(out.data, 0, 2))
