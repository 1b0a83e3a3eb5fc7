import logging
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from rdsc.codec.losses import logistic_mass
from rdsc.codec.model import CodecModel
from rdsc.tensor import round_half_away


LOG = logging.getLogger(__name__)


PRECISION = 16
TOTAL = 1 << PRECISION

# tables never cover more than [-RANGE_LIMIT, RANGE_LIMIT], the rest goes through escapes
RANGE_LIMIT = 127

# raw values carried after an escape
RAW_MIN = -(1 << 15)
RAW_MAX = (1 << 15) - 1


class LatentCode(NamedTuple):
    # int32 [Cy, h, w]
    symbols: np.ndarray
    ymin: int
    ymax: int

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.symbols.shape


def to_latent_code(y_hat: np.ndarray) -> LatentCode:
    """Integer latent of a single image. Accepts [1, Cy, h, w] or [Cy, h, w] rounded floats."""
    if y_hat.ndim == 4:
        assert y_hat.shape[0] == 1, y_hat.shape
        y_hat = y_hat[0]
    assert y_hat.ndim == 3, y_hat.shape
    symbols = np.clip(round_half_away(y_hat.astype(np.float64)), RAW_MIN, RAW_MAX).astype(np.int32)
    if symbols.size == 0:
        return LatentCode(symbols, 0, 0)
    # a latent entirely beyond the limit still gets a one symbol table, everything escapes
    ymin, ymax = np.clip([symbols.min(), symbols.max()], -RANGE_LIMIT, RANGE_LIMIT).tolist()
    return LatentCode(symbols, int(ymin), int(ymax))


@dataclass(frozen=True)
class PmfTable:
    ymin: int
    ymax: int
    # int64 [Cy, n_symbols], the escape symbol last
    freqs: np.ndarray

    @property
    def n_symbols(self) -> int:
        return self.freqs.shape[1]

    @property
    def channels(self) -> int:
        return self.freqs.shape[0]

    @property
    def escape(self) -> int:
        return self.n_symbols - 1

    @cached_property
    def cum(self) -> np.ndarray:
        cum = np.zeros((self.channels, self.n_symbols + 1), dtype=np.int64)
        np.cumsum(self.freqs, axis=1, out=cum[:, 1:])
        return cum

    @cached_property
    def cum_lists(self) -> list[list[int]]:
        return [row.tolist() for row in self.cum]

    def symbol_index(self, value: int) -> int:
        if self.ymin <= value <= self.ymax:
            return value - self.ymin
        return self.escape

    def cost_bits(self, code: LatentCode) -> float:
        """Ideal code length of `code` under this table, escapes charged 16 raw bits."""
        s = code.symbols.reshape(code.symbols.shape[0], -1)
        inside = (s >= self.ymin) & (s <= self.ymax)
        index = np.where(inside, s - self.ymin, self.escape)
        freqs = np.take_along_axis(self.freqs, index, axis=1)
        return float(np.sum(PRECISION - np.log2(freqs)) + PRECISION * np.count_nonzero(~inside))


def quantize_pmf(p: np.ndarray) -> np.ndarray:
    """Integer frequencies summing to exactly TOTAL, every one at least 1.

    `p` holds the probabilities of every symbol, escape last. Rounding leftovers
    go to the escape; an overshoot is taken back from the symbols rounded up the most.
    """
    p = np.asarray(p, dtype=np.float64)
    n = p.shape[-1]
    assert n + 1 <= TOTAL, 'too many symbols for the table precision'
    ideal = p * (TOTAL - n)
    freqs = np.maximum(1, round_half_away(ideal)).astype(np.int64)
    for row, want in zip(freqs.reshape(-1, n), ideal.reshape(-1, n)):
        diff = TOTAL - int(row.sum())
        if diff > 0:
            row[-1] += diff
        elif diff < 0:
            excess = row - want
            order = np.argsort(-excess, kind='stable')
            i = 0
            while diff < 0:
                k = order[i % n]
                if row[k] > 1:
                    row[k] -= 1
                    diff += 1
                i += 1
        assert row.sum() == TOTAL and row.min() >= 1
    return freqs


def build_pmf_table(model: CodecModel, symbol_range: tuple[int, int]) -> PmfTable:
    ymin, ymax = symbol_range
    if ymin > ymax:
        raise ValueError(f'empty symbol range [{ymin}, {ymax}]')
    mu, sigma = model.entropy_params()
    values = np.arange(ymin, ymax + 1, dtype=np.float64)[None, :]
    p, _, _ = logistic_mass(values, mu.data[:, None], sigma.data[:, None])
    escape = np.clip(1 - p.sum(axis=1, keepdims=True), 0, 1)
    freqs = quantize_pmf(np.concatenate([p, escape], axis=1))
    return PmfTable(ymin, ymax, freqs)
