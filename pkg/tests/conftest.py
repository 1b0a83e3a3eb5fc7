import os

import numpy as np
import pytest

from rdsc.codec.model import CodecConfig, CodecModel, preset
from rdsc.codec.train import TrainOptions, train
from rdsc.harness.dataset import ingest_dataset
from rdsc.harness.synthetic import synthetic_corpus
from rdsc.image import Image


def pytest_collection_modifyitems(config, items):
    if os.environ.get('RDSC_SLOW'):
        return
    skip = pytest.mark.skip(reason='slow, set RDSC_SLOW=1 to run')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)


SMALL = CodecConfig(cmid=8, cy=4, lam=100.0)


@pytest.fixture
def small_config() -> CodecConfig:
    return SMALL


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope='session')
def corpus() -> list[Image]:
    return synthetic_corpus(6)


@pytest.fixture(scope='session')
def small_images(corpus) -> list[Image]:
    """32x32 center crops, cheap enough for attacks in unit tests"""
    out = []
    for img in corpus:
        h, w = img.dims
        top, left = (h - 32) // 2, (w - 32) // 2
        out.append(Image(img.id, np.ascontiguousarray(img.pixels[top:top + 32, left:left + 32])))
    return out


@pytest.fixture(scope='session')
def untrained_codec() -> CodecModel:
    return CodecModel.create(SMALL, np.random.default_rng(7))


@pytest.fixture(scope='session')
def trained_codec(small_images) -> CodecModel:
    """A few hundred steps of a narrow codec, enough to compress better than it started."""
    model = CodecModel.create(SMALL, np.random.default_rng(0))
    return train(model, small_images, TrainOptions(epochs=60, lr=3e-3, batch_size=6, crop=32, seed=0))


FIXTURE_IMAGES = os.path.join(os.path.dirname(__file__), 'fixtures', 'images')


@pytest.fixture(scope='session')
def natural_images() -> list[Image]:
    """The checked-in photographs, 128x128"""
    return ingest_dataset(FIXTURE_IMAGES, image_size=128).images


@pytest.fixture(scope='session')
def fixture_codec(natural_images) -> CodecModel:
    """The low preset trained on the natural fixtures, for the slow reproductions."""
    model = CodecModel.create(preset('low'), np.random.default_rng(0))
    options = TrainOptions(
        epochs=40,
        steps_per_epoch=10,
        lr=1e-3,
        entropy_lr=1e-2,
        batch_size=8,
        crop=64,
        seed=0
    )
    return train(model, natural_images, options)
