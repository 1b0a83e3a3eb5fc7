"""Byte-oriented range coder with carry propagation.

32-bit range, 16-bit frequency totals. The encoder keeps a pending byte plus a run
of 0xff bytes so a late carry can ripple into already produced output; the last
symbol of every alphabet absorbs the truncation remainder of the range.
"""
from bisect import bisect_right

from rdsc.errors import DecodeError


TOP = 1 << 24
MASK32 = 0xFFFFFFFF
TOTAL_BITS = 16


class RangeEncoder:
    def __init__(self):
        self._low = 0
        self._range = MASK32
        self._cache = 0
        self._cache_size = 1
        self._out = bytearray()
        self._finished = False

    def encode(self, cum: int, freq: int) -> None:
        assert 0 <= cum and 0 < freq and cum + freq <= 1 << TOTAL_BITS
        r = self._range >> TOTAL_BITS
        low_inc = r * cum
        self._low += low_inc
        if cum + freq < 1 << TOTAL_BITS:
            self._range = r * freq
        else:
            self._range -= low_inc
        while self._range < TOP:
            self._range <<= 8
            self._shift_low()

    def _shift_low(self) -> None:
        low = self._low
        if low < 0xFF000000 or low > MASK32:
            carry = low >> 32
            temp = self._cache
            while True:
                self._out.append((temp + carry) & 0xFF)
                temp = 0xFF
                self._cache_size -= 1
                if self._cache_size == 0:
                    break
            self._cache = (low >> 24) & 0xFF
        self._cache_size += 1
        self._low = (low << 8) & MASK32

    def finish(self) -> bytes:
        assert not self._finished
        self._finished = True
        for _ in range(5):
            self._shift_low()
        return bytes(self._out)


class RangeDecoder:
    def __init__(self, data: bytes):
        if len(data) < 5:
            raise DecodeError(f'range coded payload is too short: {len(data)} bytes')
        if data[0] != 0:
            raise DecodeError('range coded payload must start with a zero byte')
        self._data = data
        self._pos = 5
        self._range = MASK32
        self._code = int.from_bytes(data[1:5], 'big')

    def decode(self, cum: list[int]) -> int:
        """Decode one symbol given the cumulative frequencies `cum` (len = n + 1, cum[-1] = total)."""
        total = cum[-1]
        assert total == 1 << TOTAL_BITS
        r = self._range >> TOTAL_BITS
        value = min(self._code // r, total - 1)
        symbol = bisect_right(cum, value) - 1
        lo = cum[symbol]
        hi = cum[symbol + 1]
        self._code -= r * lo
        if hi < total:
            self._range = r * (hi - lo)
        else:
            self._range -= r * lo
        if self._code < 0 or self._code >= self._range:
            raise DecodeError('range decoder state left its interval, payload is corrupt')
        while self._range < TOP:
            self._code = ((self._code << 8) | self._next_byte()) & MASK32
            self._range <<= 8
        return symbol

    def decode_raw(self) -> int:
        """Decode a value in [0, 2^16) coded with unit frequency."""
        r = self._range >> TOTAL_BITS
        value = min(self._code // r, (1 << TOTAL_BITS) - 1)
        self._code -= r * value
        if value < (1 << TOTAL_BITS) - 1:
            self._range = r
        else:
            self._range -= r * value
        if self._code >= self._range:
            raise DecodeError('range decoder state left its interval, payload is corrupt')
        while self._range < TOP:
            self._code = ((self._code << 8) | self._next_byte()) & MASK32
            self._range <<= 8
        return value

    def _next_byte(self) -> int:
        if self._pos >= len(self._data):
            raise DecodeError('range decoder ran past the end of the payload')
        b = self._data[self._pos]
        self._pos += 1
        return b

    def finish(self) -> None:
        if self._pos != len(self._data):
            raise DecodeError(f'{len(self._data) - self._pos} unconsumed payload bytes')


def encode_raw(encoder: RangeEncoder, value: int) -> None:
    assert 0 <= value < 1 << TOTAL_BITS
    encoder.encode(value, 1)
