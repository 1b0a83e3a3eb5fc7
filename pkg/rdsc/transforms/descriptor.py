from typing import NamedTuple

import numpy as np

from rdsc.errors import TransformError


DIHEDRAL_COUNT = 8
STRETCH_STEPS = 65
SHIFT_STEPS = 65
TRANSFORM_COUNT = DIHEDRAL_COUNT * STRETCH_STEPS ** 2 * SHIFT_STEPS ** 2


DIHEDRAL_NAMES = (
    'identity',
    'rot90',
    'rot180',
    'rot270',
    'hflip',
    'vflip',
    'hflip_rot90',
    'vflip_rot90',
)


class TransformDescriptor(NamedTuple):
    dihedral: int = 0
    # added columns / rows of bilinear stretch
    sx: int = 0
    sy: int = 0
    # zero columns on the left / rows on the top
    tx: int = 0
    ty: int = 0

    def is_identity(self) -> bool:
        return self == IDENTITY

    def is_exact(self) -> bool:
        return self.sx == 0 and self.sy == 0

    def validate(self) -> 'TransformDescriptor':
        if not 0 <= self.dihedral < DIHEDRAL_COUNT:
            raise TransformError(f'dihedral index out of range - {self.dihedral}')
        for name in ('sx', 'sy'):
            if not 0 <= getattr(self, name) < STRETCH_STEPS:
                raise TransformError(f'{name} out of range - {getattr(self, name)}')
        for name in ('tx', 'ty'):
            if not 0 <= getattr(self, name) < SHIFT_STEPS:
                raise TransformError(f'{name} out of range - {getattr(self, name)}')
        return self

    def pack(self) -> int:
        self.validate()
        index = self.dihedral
        index = index * STRETCH_STEPS + self.sy
        index = index * STRETCH_STEPS + self.sx
        index = index * SHIFT_STEPS + self.ty
        index = index * SHIFT_STEPS + self.tx
        return index

    @classmethod
    def unpack(cls, index: int) -> 'TransformDescriptor':
        if not 0 <= index < TRANSFORM_COUNT:
            raise TransformError(f'invalid transform index - {index}')
        index, tx = divmod(index, SHIFT_STEPS)
        index, ty = divmod(index, SHIFT_STEPS)
        index, sx = divmod(index, STRETCH_STEPS)
        dihedral, sy = divmod(index, STRETCH_STEPS)
        return cls(dihedral, sx, sy, tx, ty)

    def describe(self) -> str:
        return f'{DIHEDRAL_NAMES[self.dihedral]}+stretch({self.sx},{self.sy})+shift({self.tx},{self.ty})'


IDENTITY = TransformDescriptor()


def sample(rng: np.random.Generator, exclude_identity: bool = False) -> TransformDescriptor:
    """Uniform draw from the whole transform set."""
    index = int(rng.integers(1 if exclude_identity else 0, TRANSFORM_COUNT))
    return TransformDescriptor.unpack(index)
