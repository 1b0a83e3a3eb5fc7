from contextlib import contextmanager
from typing import Callable, Iterator

import numpy as np
import pytest

from rdsc.tensor import conv, core, resample


@contextmanager
def double_precision() -> Iterator[None]:
    """Forward passes in float64, for finite differences that float32 rounding would swamp."""
    with pytest.MonkeyPatch.context() as mp:
        for module in (core, conv, resample):
            mp.setattr(module, 'DTYPE', np.float64)
        yield


def numeric_grad(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-3) -> np.ndarray:
    x = x.astype(np.float64)
    g = np.zeros_like(x)
    with double_precision():
        for i in np.ndindex(x.shape):
            orig = x[i]
            x[i] = orig + h
            hi = f(x)
            x[i] = orig - h
            lo = f(x)
            x[i] = orig
            g[i] = (hi - lo) / (2 * h)
    return g


def grad_agreement(analytic: np.ndarray, expected: np.ndarray, rtol: float = 1e-3) -> float:
    """Share of coordinates within `rtol`; tiny analytic values are compared absolutely at 1e-5."""
    err = np.abs(analytic.astype(np.float64) - expected)
    tiny = np.abs(analytic) < 1e-6
    ok = np.where(tiny, err <= 1e-5, err <= rtol * np.abs(expected))
    return float(ok.mean())
