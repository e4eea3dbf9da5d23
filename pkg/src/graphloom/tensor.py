"""Dense float64 tensors with reverse-mode differentiation on an explicit tape.

The primitive set is deliberately closed: elementwise add/sub/mul with
broadcasting, matrix multiply, last-axis concat, slicing, per-axis
sum/mean, tanh/sigmoid/relu/exp/log, last-axis softmax, and embedding
gather. Logs and exps are clamped so any forward pass on finite inputs
stays finite. Ops record onto the active tape only while tracing; with no
tape active they run as plain numpy (inference fast path).
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from .errors import TensorShapeError

LOG_FLOOR = 1e-12
EXP_CEIL = 700.0


class Tensor:
    __slots__ = ("data", "grad", "parents", "backward_fn", "is_param", "name")

    def __init__(self, data, *, is_param: bool = False, name: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.parents: tuple[Tensor, ...] = ()
        self.backward_fn = None
        self.is_param = is_param
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.data.shape})"

    # convenience operators (constants are wrapped)
    def __add__(self, other):
        return add(self, _wrap(other))

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __matmul__(self, other):
        return matmul(self, _wrap(other))


def _wrap(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def parameter(data, name: str = "") -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), is_param=True, name=name)


def constant(data) -> Tensor:
    return Tensor(data)


class Tape:
    """Ordered record of traced operations; creation order is topological order."""

    def __init__(self):
        self.nodes: list[Tensor] = []

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(x) into .grad for every tensor reachable from loss."""
        if loss.data.shape != ():
            raise TensorShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
        if loss.backward_fn is None and not self.nodes:
            raise TensorShapeError("loss was not produced under tracing")
        if all(node is not loss for node in self.nodes):
            raise TensorShapeError("loss is not on this tape")
        loss.grad = np.ones(())
        for node in reversed(self.nodes):
            if node.grad is None or node.backward_fn is None:
                continue
            node.backward_fn(node.grad)


_ACTIVE: list[Tape] = []


@contextmanager
def trace():
    tape = Tape()
    _ACTIVE.append(tape)
    try:
        yield tape
    finally:
        _ACTIVE.pop()


def _tracing() -> Tape | None:
    return _ACTIVE[-1] if _ACTIVE else None


def _tracked(t: Tensor) -> bool:
    return t.is_param or t.backward_fn is not None


def _record(out: Tensor, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    tape = _tracing()
    if tape is not None and any(_tracked(p) for p in parents):
        out.parents = parents
        out.backward_fn = backward_fn
        tape.nodes.append(out)
    return out


def _accumulate(t: Tensor, grad: np.ndarray) -> None:
    if not _tracked(t):
        return  # constants need no gradient
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad = t.grad + grad


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad down to shape, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _elementwise_shapes(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise TensorShapeError(f"{op}: shapes {a.data.shape} and {b.data.shape} do not broadcast")


def add(a: Tensor, b: Tensor) -> Tensor:
    _elementwise_shapes("add", a, b)
    out = Tensor(a.data + b.data)

    def backward(grad):
        _accumulate(a, _unbroadcast(grad, a.data.shape))
        _accumulate(b, _unbroadcast(grad, b.data.shape))

    return _record(out, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _elementwise_shapes("sub", a, b)
    out = Tensor(a.data - b.data)

    def backward(grad):
        _accumulate(a, _unbroadcast(grad, a.data.shape))
        _accumulate(b, _unbroadcast(-grad, b.data.shape))

    return _record(out, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _elementwise_shapes("mul", a, b)
    out = Tensor(a.data * b.data)

    def backward(grad):
        _accumulate(a, _unbroadcast(grad * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(grad * a.data, b.data.shape))

    return _record(out, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise TensorShapeError(f"matmul: incompatible shapes {a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data)

    def backward(grad):
        _accumulate(a, grad @ b.data.T)
        _accumulate(b, a.data.T @ grad)

    return _record(out, (a, b), backward)


def concat(tensors: list[Tensor]) -> Tensor:
    """Concatenate along the last axis."""
    if not tensors:
        raise TensorShapeError("concat: need at least one tensor")
    lead = tensors[0].data.shape[:-1]
    for t in tensors[1:]:
        if t.data.shape[:-1] != lead:
            raise TensorShapeError(
                f"concat: leading dims differ: {t.data.shape} vs {tensors[0].data.shape}"
            )
    out = Tensor(np.concatenate([t.data for t in tensors], axis=-1))
    sizes = [t.data.shape[-1] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(grad):
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            _accumulate(t, grad[..., start:stop])

    return _record(out, tuple(tensors), backward)


def slice_(a: Tensor, key) -> Tensor:
    out = Tensor(a.data[key])

    def backward(grad):
        full = np.zeros_like(a.data)
        np.add.at(full, key, grad)
        _accumulate(a, full)

    return _record(out, (a,), backward)


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))

    def backward(grad):
        g = grad
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.data.shape).copy())

    return _record(out, (a,), backward)


def mean_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else a.data.shape[axis]
    out = Tensor(a.data.mean(axis=axis, keepdims=keepdims))

    def backward(grad):
        g = grad
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.data.shape) / count)

    return _record(out, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    out = Tensor(np.tanh(a.data))

    def backward(grad):
        _accumulate(a, grad * (1.0 - out.data * out.data))

    return _record(out, (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    out = Tensor(1.0 / (1.0 + np.exp(-np.clip(a.data, -EXP_CEIL, EXP_CEIL))))

    def backward(grad):
        _accumulate(a, grad * out.data * (1.0 - out.data))

    return _record(out, (a,), backward)


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0.0))

    def backward(grad):
        _accumulate(a, grad * (a.data > 0))

    return _record(out, (a,), backward)


def exp(a: Tensor) -> Tensor:
    out = Tensor(np.exp(np.minimum(a.data, EXP_CEIL)))

    def backward(grad):
        _accumulate(a, grad * out.data)

    return _record(out, (a,), backward)


def log(a: Tensor) -> Tensor:
    clamped = np.maximum(a.data, LOG_FLOOR)
    out = Tensor(np.log(clamped))

    def backward(grad):
        _accumulate(a, grad / clamped)

    return _record(out, (a,), backward)


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis, numerically shifted."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = Tensor(e / e.sum(axis=-1, keepdims=True))

    def backward(grad):
        inner = (grad * out.data).sum(axis=-1, keepdims=True)
        _accumulate(a, out.data * (grad - inner))

    return _record(out, (a,), backward)


def gather(table: Tensor, indices) -> Tensor:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise TensorShapeError(
            f"gather: index out of range for table of {table.data.shape[0]} rows"
        )
    out = Tensor(table.data[idx])

    def backward(grad):
        full = np.zeros_like(table.data)
        np.add.at(full, idx, grad)
        _accumulate(table, full)

    return _record(out, (table,), backward)


def affine(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    return add(matmul(x, weight), bias)


# ---------------------------------------------------------------------------
# parameter initialization


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, name: str = "") -> Tensor:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return parameter(rng.uniform(-bound, bound, size=(fan_in, fan_out)), name=name)


def zeros(shape, name: str = "") -> Tensor:
    return parameter(np.zeros(shape), name=name)


def embedding_table(rng: np.random.Generator, rows: int, dim: int, name: str = "") -> Tensor:
    return parameter(rng.normal(0.0, 1.0, size=(rows, dim)) / np.sqrt(dim), name=name)
