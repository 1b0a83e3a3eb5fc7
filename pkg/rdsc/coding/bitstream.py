"""`.rdbs` container: fixed header followed by the range coded latent.

    magic "RDBS" | version u16 | model id u64 | orig h, w u16 | padded h, w u16
    | latent c, h, w u16 | symbol range ymin, ymax i16 | transform index u32
    | payload length u32 | payload crc32 u32 | payload

All integers are little-endian. Latent symbols are coded channel by channel in
raster order, each channel with its own frequency table.
"""
import struct
import zlib
from typing import NamedTuple

import numpy as np

from rdsc.coding.pmf import RAW_MIN, LatentCode, PmfTable, build_pmf_table
from rdsc.coding.range_coder import RangeDecoder, RangeEncoder, encode_raw
from rdsc.codec.model import STRIDE, CodecModel
from rdsc.errors import BitstreamError, DecodeError, ModelMismatchError


MAGIC = b'RDBS'
VERSION = 1

_HEADER = struct.Struct('<4sHQHHHHHHHhhIII')
HEADER_SIZE = _HEADER.size

# the range coder never emits fewer bits than the ideal code length minus this
SLACK_BITS = 64


class Header(NamedTuple):
    model_id: int
    orig_dims: tuple[int, int]
    padded_dims: tuple[int, int]
    latent_shape: tuple[int, int, int]
    symbol_range: tuple[int, int]
    theta: int = 0


class Bitstream(NamedTuple):
    header: Header
    payload: bytes

    @property
    def theta(self) -> int:
        return self.header.theta

    def __len__(self) -> int:
        return HEADER_SIZE + len(self.payload)

    def to_bytes(self) -> bytes:
        h = self.header
        head = _HEADER.pack(
            MAGIC,
            VERSION,
            h.model_id,
            *h.orig_dims,
            *h.padded_dims,
            *h.latent_shape,
            *h.symbol_range,
            h.theta,
            len(self.payload),
            zlib.crc32(self.payload)
        )
        return head + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> 'Bitstream':
        if len(data) < HEADER_SIZE:
            raise BitstreamError(f'bitstream is truncated: {len(data)} bytes')
        (
            magic, version, model_id,
            oh, ow, ph, pw,
            lc, lh, lw,
            ymin, ymax,
            theta, length, crc
        ) = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise BitstreamError(f'not a bitstream: bad magic {magic!r}')
        if version != VERSION:
            raise BitstreamError(f'unsupported bitstream version {version}')
        payload = data[HEADER_SIZE:]
        if len(payload) != length:
            raise BitstreamError(f'payload length mismatch: header says {length}, got {len(payload)}')
        if zlib.crc32(payload) != crc:
            raise DecodeError('payload checksum mismatch')
        header = Header(
            model_id=model_id,
            orig_dims=(oh, ow),
            padded_dims=(ph, pw),
            latent_shape=(lc, lh, lw),
            symbol_range=(ymin, ymax),
            theta=theta
        )
        return cls(header, bytes(payload))


def measured_bpp(bs: Bitstream, orig_dims: tuple[int, int] | None = None) -> float:
    h, w = orig_dims or bs.header.orig_dims
    return 8 * len(bs) / (h * w)


def encode_stream(code: LatentCode, table: PmfTable, header: Header) -> Bitstream:
    assert header.latent_shape == code.shape, f'{header.latent_shape} != {code.shape}'
    assert header.symbol_range == (table.ymin, table.ymax)
    assert table.channels == code.shape[0] or code.symbols.size == 0

    encoder = RangeEncoder()
    for c, channel in enumerate(code.symbols):
        cum = table.cum_lists[c]
        escape = table.escape
        for v in channel.ravel().tolist():
            s = table.symbol_index(v)
            encoder.encode(cum[s], cum[s + 1] - cum[s])
            if s == escape:
                encode_raw(encoder, v - RAW_MIN)
    return Bitstream(header, encoder.finish())


def decode_stream(bs: Bitstream, table: PmfTable) -> LatentCode:
    shape = bs.header.latent_shape
    if tuple(bs.header.symbol_range) != (table.ymin, table.ymax):
        raise DecodeError('bitstream symbol range does not match the table')
    decoder = RangeDecoder(bs.payload)
    symbols = np.empty(shape, dtype=np.int32)
    n = shape[1] * shape[2]
    for c in range(shape[0]):
        cum = table.cum_lists[c]
        escape = table.escape
        out = []
        for _ in range(n):
            s = decoder.decode(cum)
            if s == escape:
                v = decoder.decode_raw() + RAW_MIN
                if table.ymin <= v <= table.ymax:
                    raise DecodeError(f'escaped value {v} lies inside the table range')
                out.append(v)
            else:
                out.append(s + table.ymin)
        symbols[c] = np.array(out, dtype=np.int32).reshape(shape[1:])
    decoder.finish()
    return LatentCode(symbols, table.ymin, table.ymax)


def make_header(
        model: CodecModel,
        code: LatentCode,
        orig_dims: tuple[int, int],
        padded_dims: tuple[int, int],
        theta: int = 0
) -> Header:
    assert padded_dims[0] // STRIDE == code.shape[1] and padded_dims[1] // STRIDE == code.shape[2]
    return Header(
        model_id=model.model_id,
        orig_dims=orig_dims,
        padded_dims=padded_dims,
        latent_shape=code.shape,
        symbol_range=(code.ymin, code.ymax),
        theta=theta
    )


def min_stream_bits(code: LatentCode, table: PmfTable) -> float:
    """No bitstream of `code` under `table` is shorter than this many bits, header included."""
    return 8 * HEADER_SIZE + max(0.0, table.cost_bits(code) - SLACK_BITS)


def compress(
        model: CodecModel,
        code: LatentCode,
        orig_dims: tuple[int, int],
        padded_dims: tuple[int, int],
        theta: int = 0
) -> Bitstream:
    header = make_header(model, code, orig_dims, padded_dims, theta)
    return encode_stream(code, build_pmf_table(model, header.symbol_range), header)


def decompress(bs: Bitstream, model: CodecModel) -> LatentCode:
    if bs.header.model_id != model.model_id:
        raise ModelMismatchError(
            f'bitstream was produced by model {bs.header.model_id:016x}, '
            f'not by {model.model_id:016x}'
        )
    if bs.header.latent_shape[0] != model.config.cy:
        raise DecodeError(f'latent shape {bs.header.latent_shape} does not fit the model')
    return decode_stream(bs, build_pmf_table(model, bs.header.symbol_range))
