"""Study-only transforms for measuring how much plain input randomization costs a codec.

These are never written into a bitstream: rotation is lossy and has no packed index.
"""
from typing import Literal, NamedTuple

import numpy as np
import scipy.ndimage

from rdsc.errors import TransformError


MAX_ROTATION_DEGREES = 10.0
MAX_STUDY_PAD = 32


StudyKind = Literal['rotate', 'zero_pad']


class StudyTransform(NamedTuple):
    kind: StudyKind
    degrees: float = 0.0
    # zero border added on every side
    pad: int = 0

    def validate(self) -> 'StudyTransform':
        if self.kind == 'rotate':
            if not -MAX_ROTATION_DEGREES <= self.degrees <= MAX_ROTATION_DEGREES:
                raise TransformError(f'rotation out of range - {self.degrees}')
        elif self.kind == 'zero_pad':
            if not 0 <= self.pad <= MAX_STUDY_PAD:
                raise TransformError(f'padding out of range - {self.pad}')
        else:
            raise TransformError(f'unknown study transform - {self.kind}')
        return self


def _rotate(pixels: np.ndarray, degrees: float) -> np.ndarray:
    if degrees == 0:
        return pixels
    out = scipy.ndimage.rotate(
        pixels,
        degrees,
        axes=(1, 0),
        reshape=False,
        order=1,
        mode='constant',
        cval=0.0
    )
    return np.clip(out, 0, 1).astype(np.float32)


def apply_study(t: StudyTransform, pixels: np.ndarray) -> np.ndarray:
    t.validate()
    if t.kind == 'rotate':
        return _rotate(pixels, t.degrees)
    p = t.pad
    if p == 0:
        return pixels
    return np.pad(pixels, ((p, p), (p, p), (0, 0)))


def invert_study(t: StudyTransform, pixels: np.ndarray) -> np.ndarray:
    t.validate()
    if t.kind == 'rotate':
        return _rotate(pixels, -t.degrees)
    p = t.pad
    if p == 0:
        return pixels
    h, w = pixels.shape[:2]
    if h <= 2 * p or w <= 2 * p:
        raise TransformError(f'{h}x{w} image is too small to remove a {p} pixel border')
    return np.ascontiguousarray(pixels[p:h - p, p:w - p])


def sample_study(kind: StudyKind, rng: np.random.Generator) -> StudyTransform:
    if kind == 'rotate':
        return StudyTransform('rotate', degrees=float(rng.uniform(-MAX_ROTATION_DEGREES, MAX_ROTATION_DEGREES)))
    if kind == 'zero_pad':
        return StudyTransform('zero_pad', pad=int(rng.integers(0, MAX_STUDY_PAD + 1)))
    raise TransformError(f'unknown study transform - {kind}')
