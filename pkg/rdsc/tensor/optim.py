from typing import NamedTuple, Sequence

import numpy as np

from rdsc.errors import NonFiniteError
from rdsc.tensor.core import DTYPE, Tensor


class AdamOptions(NamedTuple):
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class Adam:
    def __init__(self, params: Sequence[Tensor], options: AdamOptions = AdamOptions()):
        self.params = list(params)
        self.options = options
        self._m = [np.zeros_like(p.data, dtype=np.float64) for p in self.params]
        self._v = [np.zeros_like(p.data, dtype=np.float64) for p in self.params]
        self._step = 0

    @property
    def step_count(self) -> int:
        return self._step

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        o = self.options
        self._step += 1
        c1 = 1 - o.beta1 ** self._step
        c2 = 1 - o.beta2 ** self._step
        for p, m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            g = p.grad.astype(np.float64)
            m *= o.beta1
            m += (1 - o.beta1) * g
            v *= o.beta2
            v += (1 - o.beta2) * g * g
            update = o.lr * (m / c1) / (np.sqrt(v / c2) + o.eps)
            data = (p.data - update).astype(DTYPE)
            if not np.isfinite(data).all():
                raise NonFiniteError(f'adam step {self._step} made {p!r} non-finite')
            p.data = data
