import math
from typing import Callable, Iterable, NamedTuple, Optional, Sequence

import numpy as np

from rdsc.errors import NonFiniteError, ShapeError


DTYPE = np.float32


Grad = Optional[np.ndarray]
BackwardFn = Callable[[np.ndarray], Sequence[Grad]]


class Node(NamedTuple):
    op: str
    inputs: tuple['Tensor', ...]
    backward: BackwardFn


class Tensor:
    """Dense float32 array with an optional link to the operation that produced it.

    Leaves are tensors without a node. Only leaves created with `requires_grad=True`
    receive `grad` buffers during `backward`.
    """

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data: np.ndarray = np.ascontiguousarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self.node: Node | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        name = f' {self.name}' if self.name else ''
        return f'Tensor{name}(shape={self.shape}, requires_grad={self.requires_grad})'

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f'item() on a tensor of shape {self.shape}')
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __add__(self, other):
        return add(self, other) if isinstance(other, Tensor) else add_scalar(self, other)

    def __radd__(self, other):
        return add_scalar(self, other)

    def __sub__(self, other):
        return sub(self, other) if isinstance(other, Tensor) else add_scalar(self, -other)

    def __rsub__(self, other):
        return add_scalar(neg(self), other)

    def __mul__(self, other):
        return mul(self, other) if isinstance(other, Tensor) else scale(self, other)

    def __rmul__(self, other):
        return scale(self, other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError('division by a tensor is not supported')
        return scale(self, 1.0 / other)

    def __neg__(self):
        return neg(self)


def constant(data) -> Tensor:
    return Tensor(data)


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def record(op: str, data: np.ndarray, inputs: Iterable[Tensor], backward_fn: BackwardFn) -> Tensor:
    """Wrap the result of an operation, linking it into the graph when any input is tracked."""
    data = np.asarray(data, dtype=DTYPE)
    if not np.isfinite(data).all():
        raise NonFiniteError(f'{op} produced non-finite values')
    inputs = tuple(inputs)
    out = Tensor(data)
    if any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.node = Node(op, inputs, backward_fn)
    return out


class Graph:
    """Recorded operations reachable from a root, in topological order (inputs first)."""

    def __init__(self, tensors: list[Tensor]):
        self.tensors = tensors

    @property
    def ops(self) -> list[Node]:
        return [t.node for t in self.tensors]

    def __len__(self) -> int:
        return len(self.tensors)

    @classmethod
    def trace(cls, root: Tensor) -> 'Graph':
        order: list[Tensor] = []
        visited: set[int] = set()
        on_path: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            t, expanded = stack.pop()
            if expanded:
                on_path.discard(id(t))
                order.append(t)
                continue
            if id(t) in visited or t.node is None:
                continue
            visited.add(id(t))
            on_path.add(id(t))
            stack.append((t, True))
            for inp in reversed(t.node.inputs):
                assert id(inp) not in on_path, 'cycle in the recorded graph'
                if inp.node is not None and id(inp) not in visited:
                    stack.append((inp, False))
        return cls(order)


def backward(loss: Tensor) -> None:
    if loss.size != 1:
        raise ShapeError(f'backward() needs a scalar loss, got shape {loss.shape}')
    if loss.node is None:
        if loss.requires_grad:
            _accumulate(loss, np.ones_like(loss.data))
        return

    graph = Graph.trace(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}

    for t in reversed(graph.tensors):
        g = grads.pop(id(t), None)
        if g is None:
            continue
        input_grads = t.node.backward(g)
        assert len(input_grads) == len(t.node.inputs), t.node.op
        for inp, ig in zip(t.node.inputs, input_grads):
            if ig is None or not inp.requires_grad:
                continue
            ig = np.asarray(ig, dtype=DTYPE)
            if ig.shape != inp.shape:
                raise ShapeError(f'{t.node.op}: gradient shape {ig.shape} != input shape {inp.shape}')
            if inp.node is None:
                _accumulate(inp, ig)
            elif id(inp) in grads:
                grads[id(inp)] = grads[id(inp)] + ig
            else:
                grads[id(inp)] = ig


def _accumulate(leaf: Tensor, g: np.ndarray) -> None:
    if not np.isfinite(g).all():
        raise NonFiniteError(f'non-finite gradient reached {leaf!r}')
    if leaf.grad is None:
        leaf.grad = g.astype(DTYPE, copy=True)
    else:
        leaf.grad = leaf.grad + g


def _check_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f'{op}: shape mismatch {a.shape} vs {b.shape}')


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape('add', a, b)
    return record('add', a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape('sub', a, b)
    return record('sub', a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape('mul', a, b)
    return record('mul', a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def neg(a: Tensor) -> Tensor:
    return record('neg', -a.data, (a,), lambda g: (-g,))


def scale(a: Tensor, c: float) -> Tensor:
    c = DTYPE(c)
    return record('scale', a.data * c, (a,), lambda g: (g * c,))


def add_scalar(a: Tensor, c: float) -> Tensor:
    return record('add_scalar', a.data + DTYPE(c), (a,), lambda g: (g,))


def square(a: Tensor) -> Tensor:
    return record('square', a.data * a.data, (a,), lambda g: (2 * a.data * g,))


def sum(a: Tensor) -> Tensor:
    total = np.sum(a.data, dtype=np.float64)
    return record('sum', total, (a,), lambda g: (np.full(a.shape, g, dtype=DTYPE),))


def mean(a: Tensor) -> Tensor:
    n = a.size
    total = np.sum(a.data, dtype=np.float64) / n
    return record('mean', total, (a,), lambda g: (np.full(a.shape, g / n, dtype=DTYPE),))


def mse(a: Tensor, b: Tensor) -> Tensor:
    return mean(square(sub(a, b)))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return record('relu', np.where(mask, a.data, 0), (a,), lambda g: (g * mask,))


def leaky_relu(a: Tensor, slope: float = 0.01) -> Tensor:
    mask = a.data > 0
    slope = DTYPE(slope)
    factor = np.where(mask, DTYPE(1), slope).astype(DTYPE)
    return record('leaky_relu', a.data * factor, (a,), lambda g: (g * factor,))


ACTIVATIONS = {
    'relu': relu,
    'leaky_relu': leaky_relu,
}


def activation(a: Tensor, kind: str) -> Tensor:
    try:
        fn = ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f'unknown activation - {kind}')
    return fn(a)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data.astype(np.float64))
    return record('exp', out, (a,), lambda g: (g * out.astype(DTYPE),))


def sigmoid64(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1 / (1 + e), e / (1 + e))


def clamp_min(a: Tensor, lo: float) -> Tensor:
    mask = a.data > lo
    return record('clamp_min', np.where(mask, a.data, DTYPE(lo)), (a,), lambda g: (g * mask,))


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    mask = (a.data >= lo) & (a.data <= hi)
    return record('clip', np.clip(a.data, lo, hi), (a,), lambda g: (g * mask,))


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round half away from zero without the float32 `x + 0.5` pitfall. Never returns -0.0."""
    mag = np.abs(x)
    whole = np.floor(mag)
    up = (mag - whole) >= 0.5
    return (np.copysign(whole + up, x) + 0).astype(x.dtype)


def round_ste(a: Tensor) -> Tensor:
    """Quantize with straight-through gradient: forward rounds, backward is identity."""
    return record('round_ste', round_half_away(a.data), (a,), lambda g: (g,))


def expand_channels(p: Tensor, shape: tuple[int, ...], axis: int = 1) -> Tensor:
    """Repeat a per-channel vector over every other axis of `shape`."""
    if p.data.ndim != 1 or p.shape[0] != shape[axis]:
        raise ShapeError(f'expand_channels: {p.shape} does not match axis {axis} of {shape}')
    view = [1] * len(shape)
    view[axis] = p.shape[0]
    out = np.broadcast_to(p.data.reshape(view), shape)
    other = tuple(i for i in range(len(shape)) if i != axis)
    return record('expand_channels', out, (p,), lambda g: (np.sum(g, axis=other, dtype=np.float64),))


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """x[N,C,H,W] + b[C]."""
    if b.data.ndim != 1 or x.data.ndim != 4 or b.shape[0] != x.shape[1]:
        raise ShapeError(f'add_bias: bias {b.shape} does not match input {x.shape}')
    out = x.data + b.data.reshape(1, -1, 1, 1)
    return record('add_bias', out, (x, b), lambda g: (g, np.sum(g, axis=(0, 2, 3), dtype=np.float64)))


def center_spatial(x: Tensor) -> Tensor:
    """x - mean over the spatial axes of x[N,C,H,W]."""
    m = np.mean(x.data, axis=(2, 3), keepdims=True, dtype=np.float64)
    return record(
        'center_spatial',
        x.data - m,
        (x,),
        lambda g: (g - np.mean(g, axis=(2, 3), keepdims=True, dtype=np.float64),)
    )


LOG2E = 1 / math.log(2)
