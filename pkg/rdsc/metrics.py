import math
from dataclasses import dataclass, field
from functools import cache
from typing import NamedTuple, Sequence

import numpy as np
import scipy.ndimage

from rdsc.codec.losses import RDRecord


PSNR_CAP = 99.0

MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr_from_mse(mse: float) -> float:
    if mse <= 0:
        return math.inf
    return 10 * math.log10(1 / mse)


def psnr(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Peak signal-to-noise ratio of [0, 1] images, +inf for identical inputs."""
    assert x.shape == x_hat.shape, f'{x.shape} != {x_hat.shape}'
    d = x.astype(np.float64) - x_hat.astype(np.float64)
    return psnr_from_mse(float(np.mean(d * d)))


@cache
def _gaussian_window() -> np.ndarray:
    r = np.arange(SSIM_WINDOW, dtype=np.float64) - SSIM_WINDOW // 2
    g = np.exp(-r * r / (2 * SSIM_SIGMA ** 2))
    return g / g.sum()


def _filter(a: np.ndarray) -> np.ndarray:
    """Gaussian blur over H and W of an HxWxC array, valid region only."""
    w = _gaussian_window()
    out = scipy.ndimage.correlate1d(a, w, axis=0, mode='constant')
    out = scipy.ndimage.correlate1d(out, w, axis=1, mode='constant')
    m = SSIM_WINDOW // 2
    return out[m:-m, m:-m]


def _ssim_terms(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    mu_x = _filter(x)
    mu_y = _filter(y)
    mu_xx = mu_x * mu_x
    mu_yy = mu_y * mu_y
    mu_xy = mu_x * mu_y
    s_xx = _filter(x * x) - mu_xx
    s_yy = _filter(y * y) - mu_yy
    s_xy = _filter(x * y) - mu_xy
    cs = (2 * s_xy + c2) / (s_xx + s_yy + c2)
    lum = (2 * mu_xy + c1) / (mu_xx + mu_yy + c1)
    return float(np.mean(lum * cs)), float(np.mean(cs))


def _downsample(a: np.ndarray) -> np.ndarray:
    h, w = a.shape[0] // 2 * 2, a.shape[1] // 2 * 2
    a = a[:h, :w]
    return 0.25 * (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2])


def ms_ssim_scales(height: int, width: int) -> int:
    side = min(height, width)
    for n in range(len(MS_SSIM_WEIGHTS), 0, -1):
        if side >= (SSIM_WINDOW - 1) * 2 ** (n - 1) + 1:
            return n
    return 0


def ms_ssim(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Multi-scale SSIM of two HxWxC images in [0, 1].

    Small images use fewer scales with the weights renormalized to sum 1.
    """
    assert x.shape == x_hat.shape, f'{x.shape} != {x_hat.shape}'
    if x.ndim == 2:
        x = x[:, :, None]
        x_hat = x_hat[:, :, None]
    scales = ms_ssim_scales(x.shape[0], x.shape[1])
    if scales == 0:
        raise ValueError(f'{x.shape[0]}x{x.shape[1]} image is too small for MS-SSIM')

    weights = np.array(MS_SSIM_WEIGHTS[:scales], dtype=np.float64)
    weights /= weights.sum()
    assert abs(weights.sum() - 1) < 1e-12

    a = x.astype(np.float64)
    b = x_hat.astype(np.float64)
    value = 1.0
    for i in range(scales):
        ssim, cs = _ssim_terms(a, b)
        if i == scales - 1:
            value *= max(ssim, 0.0) ** weights[i]
        else:
            value *= max(cs, 0.0) ** weights[i]
            a = _downsample(a)
            b = _downsample(b)
    return float(value)


class Histogram(NamedTuple):
    edges: np.ndarray
    counts: np.ndarray


def histogram(values: Sequence[float], bins: int = 10, value_range: tuple[float, float] | None = None) -> Histogram:
    v = np.asarray(values, dtype=np.float64)
    assert v.size > 0, 'histogram of an empty sample'
    counts, edges = np.histogram(v, bins=bins, range=value_range)
    return Histogram(edges, counts)


@dataclass
class EvalSummary:
    condition: str
    image_ids: list[str] = field(default_factory=list)
    records: list[RDRecord] = field(default_factory=list)
    encode_ms: list[float] = field(default_factory=list)

    def add(self, image_id: str, record: RDRecord, encode_ms: float = 0.0) -> None:
        self.image_ids.append(image_id)
        self.records.append(record)
        self.encode_ms.append(encode_ms)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    @property
    def aggregates(self) -> dict[str, float]:
        assert self.records, f'no records for {self.condition}'
        out = {}
        for name in ('rate_bpp', 'psnr_db', 'ms_ssim', 'rd_loss', 'distortion'):
            col = self.column(name)
            out[f'mean_{name}'] = float(np.mean(col))
            out[f'median_{name}'] = float(np.median(col))
        out['mean_encode_ms'] = float(np.mean(self.encode_ms))
        return out

    def mean(self, name: str) -> float:
        return self.aggregates[f'mean_{name}']

    def histogram(self, name: str, bins: int = 10, value_range: tuple[float, float] | None = None) -> Histogram:
        return histogram(self.column(name), bins, value_range)
