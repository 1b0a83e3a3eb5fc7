"""Binary checkpoint container.

    magic "RDSC" | version u16 | cmid u16 | cy u16 | stride u16 | channels u16
    | activation u8 | lambda f64 | param count u16
    | per parameter: ndim u8, dims u16 * ndim, data f32 * prod(dims)

All integers and floats are little-endian.
"""
import logging
import os
import struct

import numpy as np

from rdsc.codec.model import STRIDE, CodecConfig, CodecModel, param_shapes
from rdsc.errors import CheckpointError
from rdsc.tensor import parameter


LOG = logging.getLogger(__name__)


MAGIC = b'RDSC'
VERSION = 1

_ACTIVATIONS = ('relu', 'leaky_relu')
_HEADER = struct.Struct('<4sHHHHHBdH')


def dumps(model: CodecModel) -> bytes:
    c = model.config
    parts = [
        _HEADER.pack(
            MAGIC,
            VERSION,
            c.cmid,
            c.cy,
            STRIDE,
            c.channels,
            _ACTIVATIONS.index(c.activation),
            c.lam,
            len(model.params)
        )
    ]
    for p in model.params.values():
        parts.append(struct.pack(f'<B{p.data.ndim}H', p.data.ndim, *p.shape))
        parts.append(p.data.astype('<f4').tobytes())
    return b''.join(parts)


def loads(data: bytes) -> CodecModel:
    if len(data) < _HEADER.size:
        raise CheckpointError(f'checkpoint is truncated: {len(data)} bytes')

    magic, version, cmid, cy, stride, channels, act, lam, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise CheckpointError(f'not a checkpoint file: bad magic {magic!r}')
    if version != VERSION:
        raise CheckpointError(f'unsupported checkpoint version {version}')
    if stride != STRIDE:
        raise CheckpointError(f'unsupported downsampling factor {stride}')
    if act >= len(_ACTIVATIONS):
        raise CheckpointError(f'unknown activation code {act}')

    config = CodecConfig(cmid=cmid, cy=cy, lam=lam, activation=_ACTIVATIONS[act], channels=channels)
    expected = param_shapes(config)
    if count != len(expected):
        raise CheckpointError(f'expected {len(expected)} parameters, got {count}')

    pos = _HEADER.size
    params = {}
    for name, shape in expected:
        try:
            ndim, = struct.unpack_from('<B', data, pos)
            dims = struct.unpack_from(f'<{ndim}H', data, pos + 1)
        except struct.error:
            raise CheckpointError(f'checkpoint is truncated at parameter {name}')
        pos += 1 + 2 * ndim
        if dims != shape:
            raise CheckpointError(f'parameter {name} has shape {dims}, expected {shape}')
        size = int(np.prod(dims)) * 4
        if pos + size > len(data):
            raise CheckpointError(f'checkpoint is truncated at parameter {name}')
        arr = np.frombuffer(data, dtype='<f4', count=size // 4, offset=pos).reshape(dims)
        params[name] = parameter(arr.astype(np.float32), name=name)
        pos += size

    if pos != len(data):
        raise CheckpointError(f'{len(data) - pos} trailing bytes after the last parameter')

    return CodecModel(config, params)


def save(model: CodecModel, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = f'{path}.tmp'
    with open(tmp, 'wb') as f:
        f.write(dumps(model))
    os.replace(tmp, path)
    LOG.info(f'saved checkpoint {path}', extra={'model_id': f'{model.model_id:016x}'})


def load(path: str) -> CodecModel:
    with open(path, 'rb') as f:
        data = f.read()
    try:
        return loads(data)
    except CheckpointError as e:
        e.add_note(f'checkpoint file: {path}')
        raise
