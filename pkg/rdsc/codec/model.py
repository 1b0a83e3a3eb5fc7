import logging
from contextlib import contextmanager
from typing import Iterator, Literal, NamedTuple

import numpy as np

from rdsc.tensor import (
    Tensor,
    activation,
    add_bias,
    clamp_min,
    conv2d,
    conv2d_transpose,
    exp,
    parameter,
)


LOG = logging.getLogger(__name__)


# total downsampling factor of the encoder (two stride-2 stages)
STRIDE = 4
SIGMA_MIN = 1e-6


Activation = Literal['relu', 'leaky_relu']


class CodecConfig(NamedTuple):
    cmid: int = 32
    cy: int = 8
    lam: float = 100.0
    activation: Activation = 'leaky_relu'
    channels: int = 3


PRESETS: dict[str, CodecConfig] = {
    'low': CodecConfig(lam=100.0),
    'high': CodecConfig(lam=1000.0),
}


def half_width(config: CodecConfig) -> CodecConfig:
    return config._replace(cmid=max(1, config.cmid // 2), cy=max(1, config.cy // 2))


def preset(name: str) -> CodecConfig:
    """`low`, `high` or either with a `-half` suffix"""
    base, _, variant = name.partition('-')
    try:
        config = PRESETS[base]
    except KeyError:
        raise ValueError(f'unknown model preset - {name}')
    if variant == 'half':
        return half_width(config)
    if variant:
        raise ValueError(f'unknown model preset - {name}')
    return config


def param_shapes(config: CodecConfig) -> list[tuple[str, tuple[int, ...]]]:
    c, m, y = config.channels, config.cmid, config.cy
    return [
        ('enc1.w', (m, c, 5, 5)),
        ('enc1.b', (m,)),
        ('enc2.w', (m, m, 3, 3)),
        ('enc2.b', (m,)),
        ('enc3.w', (y, m, 5, 5)),
        ('enc3.b', (y,)),
        ('dec1.w', (y, m, 4, 4)),
        ('dec1.b', (m,)),
        ('dec2.w', (m, m, 3, 3)),
        ('dec2.b', (m,)),
        ('dec3.w', (m, c, 4, 4)),
        ('dec3.b', (c,)),
        ('entropy.mu', (y,)),
        ('entropy.log_scale', (y,)),
    ]


class CodecModel:
    def __init__(self, config: CodecConfig, params: dict[str, Tensor]):
        expected = param_shapes(config)
        assert [name for name, _ in expected] == list(params), 'parameter set does not match the config'
        for name, shape in expected:
            assert params[name].shape == shape, f'{name}: {params[name].shape} != {shape}'
        self.config = config
        self.params = params
        self._id: int | None = None

    @classmethod
    def create(cls, config: CodecConfig, rng: np.random.Generator) -> 'CodecModel':
        params = {}
        for name, shape in param_shapes(config):
            if name.endswith('.w'):
                if name.startswith('dec'):
                    fan_in = shape[0] * shape[2] * shape[3] // 4
                else:
                    fan_in = shape[1] * shape[2] * shape[3]
                data = rng.normal(0, np.sqrt(2 / fan_in), shape)
            else:
                data = np.zeros(shape)
            params[name] = parameter(data, name=name)
        model = cls(config, params)
        LOG.debug('created codec', extra={'params': model.parameter_count()})
        return model

    @property
    def lam(self) -> float:
        return self.config.lam

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    @contextmanager
    def frozen(self) -> Iterator['CodecModel']:
        """Stop recording parameter gradients, e.g. while differentiating w.r.t. the input only."""
        flags = [p.requires_grad for p in self.params.values()]
        for p in self.params.values():
            p.requires_grad = False
        try:
            yield self
        finally:
            for p, flag in zip(self.params.values(), flags):
                p.requires_grad = flag

    def invalidate(self) -> None:
        """Must be called after parameters were changed in place"""
        self._id = None

    @property
    def model_id(self) -> int:
        if self._id is None:
            h = fnv1a64()
            for p in self.params.values():
                h.update(p.data.astype('<f4').tobytes())
            self._id = h.digest()
        return self._id

    def _act(self, x: Tensor) -> Tensor:
        return activation(x, self.config.activation)

    def encoder_features(self, x: Tensor) -> list[Tensor]:
        """Outputs of every encoder layer, the last one being the latent y."""
        p = self.params
        a1 = self._act(add_bias(conv2d(x, p['enc1.w'], stride=2, pad=2), p['enc1.b']))
        a2 = self._act(add_bias(conv2d(a1, p['enc2.w'], stride=1, pad=1), p['enc2.b']))
        y = add_bias(conv2d(a2, p['enc3.w'], stride=2, pad=2), p['enc3.b'])
        return [a1, a2, y]

    def encode(self, x: Tensor) -> Tensor:
        return self.encoder_features(x)[-1]

    def decode(self, y_hat: Tensor) -> Tensor:
        """Raw decoder output for the padded canvas, not clipped."""
        p = self.params
        h = self._act(add_bias(conv2d_transpose(y_hat, p['dec1.w'], stride=2, pad=1), p['dec1.b']))
        h = self._act(add_bias(conv2d(h, p['dec2.w'], stride=1, pad=1), p['dec2.b']))
        return add_bias(conv2d_transpose(h, p['dec3.w'], stride=2, pad=1), p['dec3.b'])

    def entropy_params(self) -> tuple[Tensor, Tensor]:
        """Per-channel location and scale of the discretized logistic."""
        mu = self.params['entropy.mu']
        sigma = clamp_min(exp(self.params['entropy.log_scale']), SIGMA_MIN)
        return mu, sigma


_FNV_OFFSET = 0xcbf29ce484222325
_FNV_PRIME = 0x100000001b3
_MASK64 = (1 << 64) - 1


class fnv1a64:
    def __init__(self):
        self._h = _FNV_OFFSET

    def update(self, data: bytes) -> None:
        h = self._h
        for b in data:
            h = ((h ^ b) * _FNV_PRIME) & _MASK64
        self._h = h

    def digest(self) -> int:
        return self._h
