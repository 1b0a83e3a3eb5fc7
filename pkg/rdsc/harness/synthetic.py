"""Procedural fixture corpus.

Images are quantized to 8 bits so a synthetic image written to PNG and read back
is bit-identical to the generated one.
"""
from typing import Callable

import numpy as np
import scipy.ndimage

from rdsc.image import Image, from_bytes
from rdsc.harness.seeds import rng_for


PREFIX = 'synthetic'

Painter = Callable[[np.random.Generator, int], np.ndarray]


def _grid(size: int) -> tuple[np.ndarray, np.ndarray]:
    v = (np.arange(size, dtype=np.float64) + 0.5) / size
    return np.meshgrid(v, v, indexing='ij')


def _gradient(rng: np.random.Generator, size: int) -> np.ndarray:
    yy, xx = _grid(size)
    angle = rng.uniform(0, 2 * np.pi)
    t = np.cos(angle) * xx + np.sin(angle) * yy
    t = (t - t.min()) / max(np.ptp(t), 1e-9)
    lo, hi = rng.uniform(0, 1, (2, 3))
    return lo + t[..., None] * (hi - lo)


def _blobs(rng: np.random.Generator, size: int) -> np.ndarray:
    yy, xx = _grid(size)
    out = np.broadcast_to(rng.uniform(0, 1, 3), (size, size, 3)).copy()
    for _ in range(int(rng.integers(3, 8))):
        cy, cx = rng.uniform(0, 1, 2)
        r = rng.uniform(0.05, 0.3)
        mask = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * r * r))
        out += mask[..., None] * (rng.uniform(0, 1, 3) - out)
    return out


def _stripes(rng: np.random.Generator, size: int) -> np.ndarray:
    yy, xx = _grid(size)
    freq = rng.uniform(2, 12)
    angle = rng.uniform(0, np.pi)
    wave = 0.5 + 0.5 * np.sin(2 * np.pi * freq * (np.cos(angle) * xx + np.sin(angle) * yy))
    a, b = rng.uniform(0, 1, (2, 3))
    return a + wave[..., None] * (b - a)


def _texture(rng: np.random.Generator, size: int) -> np.ndarray:
    noise = rng.normal(0, 1, (size, size, 3))
    smooth = scipy.ndimage.gaussian_filter(noise, sigma=(rng.uniform(0.8, 3), rng.uniform(0.8, 3), 0))
    smooth = (smooth - smooth.mean()) / max(smooth.std(), 1e-9)
    return 0.5 + 0.18 * smooth


def _scene(rng: np.random.Generator, size: int) -> np.ndarray:
    base = _gradient(rng, size)
    yy, xx = _grid(size)
    for _ in range(int(rng.integers(2, 5))):
        y0, x0 = rng.uniform(0, 0.7, 2)
        h, w = rng.uniform(0.1, 0.4, 2)
        box = (yy >= y0) & (yy < y0 + h) & (xx >= x0) & (xx < x0 + w)
        base[box] = rng.uniform(0, 1, 3)
    return base + 0.03 * rng.normal(0, 1, base.shape)


PAINTERS: tuple[Painter, ...] = (_gradient, _blobs, _stripes, _texture, _scene)


def image_size(index: int) -> int:
    return 128 if index % 6 == 5 else 64


def synthetic_image(index: int, seed: int = 0) -> Image:
    size = image_size(index)
    rng = rng_for(seed, PREFIX, index)
    painter = PAINTERS[index % len(PAINTERS)]
    pixels = np.clip(painter(rng, size), 0, 1)
    return Image(
        id=f'{PREFIX}-{index:03d}',
        pixels=from_bytes(np.round(pixels * 255).astype(np.uint8))
    )


def synthetic_corpus(count: int, seed: int = 0) -> list[Image]:
    return [synthetic_image(i, seed) for i in range(count)]
