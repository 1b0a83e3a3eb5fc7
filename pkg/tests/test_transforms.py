import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdsc.errors import TransformError
from rdsc.metrics import psnr
from rdsc.tensor import Tensor, backward, constant, mul, sum
from rdsc.transforms import (
    IDENTITY,
    TRANSFORM_COUNT,
    StudyTransform,
    TransformDescriptor,
    apply,
    apply_study,
    apply_tensor,
    invert,
    invert_study,
    sample,
    sample_study,
    transformed_dims,
)


descriptors = st.builds(
    TransformDescriptor,
    dihedral=st.integers(0, 7),
    sx=st.integers(0, 64),
    sy=st.integers(0, 64),
    tx=st.integers(0, 64),
    ty=st.integers(0, 64),
)


def image(h: int, w: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).uniform(size=(h, w, 3)).astype(np.float32)


def test_transform_count():
    assert TRANSFORM_COUNT == 142_805_000
    assert IDENTITY.pack() == 0
    assert TransformDescriptor.unpack(TRANSFORM_COUNT - 1) == TransformDescriptor(7, 64, 64, 64, 64)


@settings(max_examples=200)
@given(descriptors)
def test_pack_unpack(desc):
    index = desc.pack()
    assert 0 <= index < TRANSFORM_COUNT
    assert TransformDescriptor.unpack(index) == desc


@settings(max_examples=200)
@given(st.integers(0, TRANSFORM_COUNT - 1))
def test_unpack_pack(index):
    assert TransformDescriptor.unpack(index).pack() == index


@pytest.mark.parametrize('index', [-1, TRANSFORM_COUNT, 2 ** 32 - 1])
def test_bad_index(index):
    with pytest.raises(TransformError):
        TransformDescriptor.unpack(index)


@pytest.mark.parametrize('desc', [
    TransformDescriptor(dihedral=8),
    TransformDescriptor(sx=65),
    TransformDescriptor(ty=-1),
])
def test_bad_descriptor(desc):
    with pytest.raises(TransformError):
        desc.pack()


def test_shift_geometry():
    x = image(10, 10)
    desc = TransformDescriptor(tx=3, ty=5)
    out = apply(desc, x)
    assert out.shape == (15, 13, 3)
    assert transformed_dims(desc, 10, 10) == (15, 13)
    assert not out[:5].any() and not out[:, :3].any()
    assert np.array_equal(out[5:, 3:], x)


def test_rotation_swaps_dims():
    desc = TransformDescriptor(dihedral=1, sx=2, ty=4)
    assert transformed_dims(desc, 10, 20) == (24, 12)
    assert apply(desc, image(10, 20)).shape == (24, 12, 3)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 7), st.integers(0, 64), st.integers(0, 64), st.integers(1, 12), st.integers(1, 12))
def test_exact_transforms_invert_bitwise(dihedral, tx, ty, h, w):
    desc = TransformDescriptor(dihedral, 0, 0, tx, ty)
    x = image(h, w, seed=h * 13 + w)
    assert np.array_equal(invert(desc, apply(desc, x), (h, w)), x)


@settings(max_examples=30, deadline=None)
@given(descriptors)
def test_constant_image_survives_any_transform(desc):
    x = np.full((6, 9, 3), 0.375, dtype=np.float32)
    back = invert(desc, apply(desc, x), (6, 9))
    assert np.array_equal(back, x)


def test_stretch_round_trip_is_close_on_smooth_images():
    yy, xx = np.mgrid[0:32, 0:32] / 31
    x = np.stack([xx, yy, 0.5 * (xx + yy)], axis=2).astype(np.float32)
    desc = TransformDescriptor(dihedral=3, sx=17, sy=5, tx=2, ty=9)
    back = invert(desc, apply(desc, x), (32, 32))
    assert back.shape == x.shape
    assert np.max(np.abs(back - x)) < 0.02


def test_stretch_round_trip_psnr_on_natural_images(natural_images):
    desc = TransformDescriptor(sx=16, sy=16)
    for img in natural_images:
        back = invert(desc, apply(desc, img.pixels), img.dims)
        value = psnr(img.pixels, back)
        assert math.isfinite(value), img.id
        assert value > 15, img.id


def test_inconsistent_dims_are_rejected():
    desc = TransformDescriptor(tx=3)
    with pytest.raises(TransformError):
        invert(desc, image(10, 13), (10, 11))
    with pytest.raises(TransformError):
        invert(TransformDescriptor(tx=20), image(10, 13))


def test_transforms_are_differentiable():
    desc = TransformDescriptor(dihedral=6, sx=3, sy=1, tx=2, ty=1)
    x = Tensor(image(5, 7).transpose(2, 0, 1), requires_grad=True)
    out = apply_tensor(desc, x)
    weights = np.random.default_rng(1).normal(size=out.shape)
    backward(sum(mul(out, constant(weights))))
    assert x.grad.shape == x.shape
    assert np.abs(x.grad).sum() > 0


def test_sample_excludes_identity():
    rng = np.random.default_rng(0)
    draws = [sample(rng, exclude_identity=True) for _ in range(200)]
    assert IDENTITY not in draws
    assert len({d.dihedral for d in draws}) == 8


def test_sample_is_reproducible():
    a = [sample(np.random.default_rng(5)) for _ in range(3)]
    b = [sample(np.random.default_rng(5)) for _ in range(3)]
    assert a == b


def test_describe():
    assert TransformDescriptor(4, 1, 2, 3, 4).describe() == 'hflip+stretch(1,2)+shift(3,4)'


def test_zero_pad_study_round_trip():
    x = image(16, 20)
    t = StudyTransform('zero_pad', pad=5)
    padded = apply_study(t, x)
    assert padded.shape == (26, 30, 3)
    assert np.array_equal(invert_study(t, padded), x)


def test_rotation_study_is_close_in_the_center():
    yy, xx = np.mgrid[0:48, 0:48] / 47
    x = np.stack([xx, yy, xx * yy], axis=2).astype(np.float32)
    t = StudyTransform('rotate', degrees=7.5)
    rotated = apply_study(t, x)
    assert rotated.shape == x.shape
    back = invert_study(t, rotated)
    assert np.max(np.abs(back[12:36, 12:36] - x[12:36, 12:36])) < 0.02


@pytest.mark.parametrize('t', [
    StudyTransform('rotate', degrees=11),
    StudyTransform('zero_pad', pad=33),
    StudyTransform('shear'),
])
def test_bad_study_transforms(t):
    with pytest.raises(TransformError):
        t.validate()


def test_study_samples_are_valid():
    rng = np.random.default_rng(3)
    for kind in ('rotate', 'zero_pad'):
        for _ in range(20):
            sample_study(kind, rng).validate()
    with pytest.raises(TransformError):
        sample_study('shear', rng)


@pytest.mark.slow
def test_dihedral_draws_are_uniform():
    n = 100_000
    rng = np.random.default_rng(2024)
    counts = np.bincount([sample(rng).dihedral for _ in range(n)], minlength=8)
    sigma = math.sqrt(n * (1 / 8) * (7 / 8))
    assert np.all(np.abs(counts - n / 8) <= 5 * sigma), counts


@pytest.mark.slow
def test_pack_unpack_on_a_million_indices():
    indices = np.random.default_rng(3).integers(0, TRANSFORM_COUNT, size=1_000_000).tolist()
    for index in indices:
        desc = TransformDescriptor.unpack(index)
        assert desc.pack() == index
