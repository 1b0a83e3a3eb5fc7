from typing import NamedTuple

import numpy as np


class Image(NamedTuple):
    id: str
    # H x W x C, float32 in [0, 1]
    pixels: np.ndarray

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def dims(self) -> tuple[int, int]:
        return self.pixels.shape[0], self.pixels.shape[1]


def to_batch(pixels: np.ndarray) -> np.ndarray:
    """HWC -> 1xCxHxW"""
    assert pixels.ndim == 3, pixels.shape
    return np.ascontiguousarray(pixels.transpose(2, 0, 1)[None], dtype=np.float32)


def from_batch(batch: np.ndarray) -> np.ndarray:
    """1xCxHxW -> HWC"""
    assert batch.ndim == 4 and batch.shape[0] == 1, batch.shape
    return np.ascontiguousarray(batch[0].transpose(1, 2, 0), dtype=np.float32)


def from_bytes(data: np.ndarray) -> np.ndarray:
    """8-bit pixels to [0, 1] floats, 255 -> 1.0 exactly."""
    assert data.dtype == np.uint8
    if data.ndim == 2:
        data = data[:, :, None]
    return (data.astype(np.float32) / np.float32(255)).astype(np.float32)


def to_bytes(pixels: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(pixels * 255 + 0.5), 0, 255).astype(np.uint8)
