import logging
import os
from typing import NamedTuple

import numpy as np
import PIL.Image

from rdsc.errors import DatasetError
from rdsc.harness.seeds import rng_for
from rdsc.harness.synthetic import PREFIX, synthetic_corpus
from rdsc.image import Image, from_bytes, to_bytes


LOG = logging.getLogger(__name__)


EXTENSIONS = ('.png', '.ppm', '.pgm', '.pnm', '.bmp', '.tif', '.tiff', '.jpg', '.jpeg')


class Skipped(NamedTuple):
    file: str
    reason: str


class Dataset(NamedTuple):
    images: list[Image]
    skipped: list[Skipped]


def read_image(path: str) -> np.ndarray:
    """8-bit image file -> HxWx3 float32 in [0, 1]"""
    with PIL.Image.open(path) as img:
        img.load()
        if img.mode not in ('RGB', 'L', 'P', 'RGBA', 'LA'):
            raise DatasetError(f'{path}: not an 8-bit image (mode {img.mode})')
        data = np.asarray(img.convert('RGB'), dtype=np.uint8)
    return from_bytes(data)


def write_image(path: str, pixels: np.ndarray) -> None:
    PIL.Image.fromarray(to_bytes(pixels), mode='RGB').save(path)


def fit(pixels: np.ndarray, size: int) -> np.ndarray:
    """Resize the short side to `size`, then center-crop to size x size."""
    h, w = pixels.shape[:2]
    if min(h, w) != size:
        scale = size / min(h, w)
        dims = max(size, round(w * scale)), max(size, round(h * scale))
        img = PIL.Image.fromarray(to_bytes(pixels), mode='RGB').resize(dims, PIL.Image.Resampling.BICUBIC)
        pixels = from_bytes(np.asarray(img, dtype=np.uint8))
        h, w = pixels.shape[:2]
    top = (h - size) // 2
    left = (w - size) // 2
    return np.ascontiguousarray(pixels[top:top + size, left:left + size])


def _list_files(path: str) -> list[str]:
    try:
        names = os.listdir(path)
    except FileNotFoundError:
        raise DatasetError(f'dataset directory {path} does not exist')
    return sorted(n for n in names if os.path.splitext(n)[1].lower() in EXTENSIONS)


def _select(items: list, limit: int | None, split_seed: int) -> list:
    if limit is None or limit >= len(items):
        return items
    picked = rng_for(split_seed, 'split').choice(len(items), size=limit, replace=False)
    return [items[i] for i in sorted(picked)]


def ingest_dataset(
        path: str,
        image_size: int | None = None,
        split_seed: int = 0,
        limit: int | None = None
) -> Dataset:
    """Load a directory of images in lexicographic filename order.

    `synthetic:N` instead generates the procedural fixture corpus of N images.
    With `limit`, a subset chosen by `split_seed` is kept, still in filename order.
    """
    if path.startswith(f'{PREFIX}:'):
        count = path.partition(':')[2]
        if not count.isdigit() or int(count) == 0:
            raise DatasetError(f'invalid synthetic dataset - {path}')
        images = _select(synthetic_corpus(int(count), split_seed), limit, split_seed)
        if image_size is not None:
            images = [Image(img.id, fit(img.pixels, image_size)) for img in images]
        return Dataset(images, [])

    files = _select(_list_files(path), limit, split_seed)
    images = []
    skipped = []
    for name in files:
        file = os.path.join(path, name)
        try:
            pixels = read_image(file)
        except (OSError, DatasetError) as ex:
            LOG.warning(f'skipping unreadable image {file}', extra={'reason': str(ex)})
            skipped.append(Skipped(name, str(ex)))
            continue
        if image_size is not None:
            pixels = fit(pixels, image_size)
        images.append(Image(os.path.splitext(name)[0], pixels))

    if not images:
        raise DatasetError(f'no readable images in {path}')

    LOG.info('dataset loaded', extra={'path': path, 'images': len(images), 'skipped': len(skipped)})
    return Dataset(images, skipped)
