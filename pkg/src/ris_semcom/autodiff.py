"""Dense float64 tensors with reverse-mode automatic differentiation.

Small enough to read in one sitting, big enough to train the transformer
transceiver in this package.  Provides elementwise arithmetic with numpy
broadcasting, batched matmul, softmax, layer norm, embedding lookup,
reductions, and a complex multiply that treats the trailing axis of size 2
as re/im parts.

Graphs are built eagerly: every operation records its parents and a closure
that maps the output gradient to parent gradients.  ``backward`` replays the
graph once in reverse topological order.  All arithmetic is float64 and no
randomness lives in this module, so identical inputs give bit-identical
values and gradients.

Tensors produced by operations are never mutated.  Leaf parameter buffers
are owned by the caller (the optimizer and the finite-difference harness
rewrite ``data`` in place between forward passes); a fresh forward pass must
be run after any such rewrite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "ShapeError",
    "Tensor",
    "ComputationRecord",
    "add",
    "sub",
    "mul",
    "matmul",
    "softmax",
    "layer_norm",
    "relu",
    "log",
    "power",
    "clip",
    "maximum",
    "embedding",
    "gather_last",
    "complex_mul",
    "backward",
    "finite_diff_check",
]


class ShapeError(ValueError):
    """Operand shapes violate an operation's contract."""


def _coerce(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


class Tensor:
    """A float64 array plus the bookkeeping needed for reverse mode.

    ``grad`` is ``None`` until :func:`backward` runs over a graph containing
    this tensor.  ``requires_grad`` marks trainable leaves; it propagates
    automatically to operation outputs.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = _coerce(data)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # -- operators ---------------------------------------------------------

    def __add__(self, other):
        return add(self, _wrap(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, _wrap(-1.0))

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("divide by a constant, or use power() for tensor denominators")
        return mul(self, _wrap(1.0 / float(other)))

    def __pow__(self, exponent):
        return power(self, float(exponent))

    def __matmul__(self, other):
        return matmul(self, other)

    # -- shape manipulation ------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        x = self
        out_data = x.data.reshape(shape)

        def backward_fn(g: np.ndarray) -> None:
            _accumulate(x, g.reshape(x.shape))

        return _make(out_data, (x,), backward_fn)

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if len(axes) != self.ndim:
            raise ShapeError(f"transpose needs {self.ndim} axes, got {axes}")
        x = self
        inverse = tuple(np.argsort(axes))

        def backward_fn(g: np.ndarray) -> None:
            _accumulate(x, g.transpose(inverse))

        return _make(self.data.transpose(axes), (x,), backward_fn)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return _reduce(self, axis, keepdims, mean=False)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return _reduce(self, axis, keepdims, mean=True)

    def backward(self) -> dict["Tensor", np.ndarray]:
        return backward(self)


def _wrap(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor(data)
    out._parents = parents
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._backward_fn = backward_fn
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape``, undoing numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- elementwise arithmetic ------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    data = a.data + b.data

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _make(data, (a, b), backward_fn)


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    data = a.data - b.data

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(-g, b.shape))

    return _make(data, (a, b), backward_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    data = a.data * b.data

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _make(data, (a, b), backward_fn)


def relu(x: Tensor) -> Tensor:
    x = _wrap(x)
    data = np.maximum(x.data, 0.0)

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(x, g * (x.data > 0.0))

    return _make(data, (x,), backward_fn)


def log(x: Tensor) -> Tensor:
    """Natural logarithm.  The caller is responsible for keeping x > 0
    (the loss clamps probabilities before taking logs)."""
    x = _wrap(x)
    data = np.log(x.data)

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(x, g / x.data)

    return _make(data, (x,), backward_fn)


def power(x: Tensor, exponent: float) -> Tensor:
    """Elementwise x**p for a constant float p (x > 0 for non-integer p)."""
    x = _wrap(x)
    data = x.data ** exponent

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(x, g * exponent * x.data ** (exponent - 1.0))

    return _make(data, (x,), backward_fn)


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; the gradient passes through unclipped entries."""
    x = _wrap(x)
    data = np.clip(x.data, lo, hi)
    inside = (x.data >= lo) & (x.data <= hi)

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(x, g * inside)

    return _make(data, (x,), backward_fn)


def maximum(x: Tensor, floor: float) -> Tensor:
    """Elementwise max(x, floor); gradient flows where x > floor."""
    x = _wrap(x)
    data = np.maximum(x.data, floor)

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(x, g * (x.data > floor))

    return _make(data, (x,), backward_fn)


# -- reductions ------------------------------------------------------------


def _normalize_axes(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def _reduce(x: Tensor, axis, keepdims: bool, mean: bool) -> Tensor:
    axes = _normalize_axes(axis, x.ndim)
    count = 1
    for a in axes:
        count *= x.shape[a]
    data = np.sum(x.data, axis=axes, keepdims=keepdims)
    if mean:
        data = data / count

    def backward_fn(g: np.ndarray) -> None:
        if not keepdims:
            for a in sorted(axes):
                g = np.expand_dims(g, a)
        g = np.broadcast_to(g, x.shape)
        _accumulate(x, g / count if mean else g)

    return _make(data, (x,), backward_fn)


# -- linear algebra --------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with numpy batch semantics.

    Both operands must have rank >= 2; leading axes broadcast, the product
    contracts the last axis of ``a`` against the second-to-last of ``b``.
    """
    a, b = _wrap(a), _wrap(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs rank >= 2 operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(a, _unbroadcast(g @ b.data.swapaxes(-1, -2), a.shape))
        _accumulate(b, _unbroadcast(a.data.swapaxes(-1, -2) @ g, b.shape))

    return _make(data, (a, b), backward_fn)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax along ``axis`` (shifted by the row max)."""
    x = _wrap(x)
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / np.sum(e, axis=axis, keepdims=True)

    def backward_fn(g: np.ndarray) -> None:
        inner = np.sum(g * s, axis=axis, keepdims=True)
        _accumulate(x, s * (g - inner))

    return _make(s, (x,), backward_fn)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-9) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then apply the
    elementwise affine ``gain * x_hat + bias``.

    ``gain`` and ``bias`` must have shape ``(x.shape[-1],)``.  ``eps`` guards
    zero-variance rows (a constant row normalizes to zeros).
    """
    x, gain, bias = _wrap(x), _wrap(gain), _wrap(bias)
    feat = (x.shape[-1],)
    if gain.shape != feat or bias.shape != feat:
        raise ShapeError(
            f"layer_norm affine shapes {gain.shape}/{bias.shape} do not match feature dim {feat}"
        )
    mu = np.mean(x.data, axis=-1, keepdims=True)
    var = np.mean((x.data - mu) ** 2, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xn = (x.data - mu) * inv
    data = xn * gain.data + bias.data
    lead_axes = tuple(range(x.ndim - 1))

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(gain, np.sum(g * xn, axis=lead_axes))
        _accumulate(bias, np.sum(g, axis=lead_axes))
        gxn = g * gain.data
        m1 = np.mean(gxn, axis=-1, keepdims=True)
        m2 = np.mean(gxn * xn, axis=-1, keepdims=True)
        _accumulate(x, inv * (gxn - m1 - xn * m2))

    return _make(data, (x, gain, bias), backward_fn)


# -- lookups ---------------------------------------------------------------


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup ``table[ids]``; gradient scatter-adds into the table.

    ``ids`` is an integer array; out-of-range ids raise IndexError.
    """
    table = _wrap(table)
    ids = np.asarray(ids)
    if table.ndim != 2:
        raise ShapeError(f"embedding table must be rank 2, got {table.shape}")
    data = table.data[ids]

    def backward_fn(g: np.ndarray) -> None:
        if not table.requires_grad:
            return
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        _accumulate(table, gt)

    return _make(data, (table,), backward_fn)


def gather_last(x: Tensor, idx: np.ndarray) -> Tensor:
    """Pick one entry along the last axis per leading position.

    ``idx`` has shape ``x.shape[:-1]``; the output drops the last axis.
    """
    x = _wrap(x)
    idx = np.asarray(idx)
    if idx.shape != x.shape[:-1]:
        raise ShapeError(f"gather_last index shape {idx.shape} != leading shape {x.shape[:-1]}")
    expanded = idx[..., None]
    data = np.take_along_axis(x.data, expanded, axis=-1)[..., 0]

    def backward_fn(g: np.ndarray) -> None:
        gx = np.zeros_like(x.data)
        np.put_along_axis(gx, expanded, g[..., None], axis=-1)
        _accumulate(x, gx)

    return _make(data, (x,), backward_fn)


# -- complex arithmetic on a trailing re/im axis ---------------------------


def _cmul_data(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    re = x[..., 0] * y[..., 0] - x[..., 1] * y[..., 1]
    im = x[..., 0] * y[..., 1] + x[..., 1] * y[..., 0]
    return np.stack((re, im), axis=-1)


def _conj_data(x: np.ndarray) -> np.ndarray:
    out = x.copy()
    out[..., 1] = -out[..., 1]
    return out


def complex_mul(a: Tensor, b: Tensor) -> Tensor:
    """Complex product of tensors whose trailing axis of size 2 holds re/im.

    Leading axes broadcast.  The gradient of each operand is the output
    gradient complex-multiplied by the conjugate of the other operand, which
    is exactly the real-pair Jacobian product.
    """
    a, b = _wrap(a), _wrap(b)
    if a.shape[-1:] != (2,) or b.shape[-1:] != (2,):
        raise ShapeError(f"complex_mul needs trailing re/im axes of size 2, got {a.shape} and {b.shape}")
    data = _cmul_data(a.data, b.data)

    def backward_fn(g: np.ndarray) -> None:
        _accumulate(a, _unbroadcast(_cmul_data(g, _conj_data(b.data)), a.shape))
        _accumulate(b, _unbroadcast(_cmul_data(g, _conj_data(a.data)), b.shape))

    return _make(data, (a, b), backward_fn)


# -- graph replay ----------------------------------------------------------


@dataclass
class ComputationRecord:
    """Tensors of one forward pass, parents before children."""

    nodes: list[Tensor]

    @classmethod
    def trace(cls, root: Tensor) -> "ComputationRecord":
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))
        return cls(order)


def backward(loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Reverse sweep from a scalar loss.

    Clears stale gradients on every tensor in the graph, seeds the loss
    gradient with one, visits each node exactly once in reverse topological
    order, and returns a map from each trainable leaf to its gradient.
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    record = ComputationRecord.trace(loss)
    for node in record.nodes:
        node.grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(record.nodes):
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)
    grads: dict[Tensor, np.ndarray] = {}
    for node in record.nodes:
        if node.requires_grad and not node._parents:
            grads[node] = node.grad if node.grad is not None else np.zeros_like(node.data)
    return grads


def finite_diff_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    step: float = 1e-6,
    max_coordinates: int | None = 8,
    seed: int = 0,
) -> float:
    """Compare analytic gradients of ``f()`` against central differences.

    ``f`` must rebuild the forward graph on every call and return a scalar
    Tensor; it is evaluated with the parameter buffers perturbed in place.
    At most ``max_coordinates`` coordinates per tensor are probed (all of
    them when the tensor is small or ``max_coordinates`` is None), chosen by
    a seeded generator so the check is repeatable.

    Returns the worst relative error
    ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-12)``.
    """
    grads = backward(f())
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in params:
        analytic = grads.get(p)
        if analytic is None:
            analytic = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        aflat = analytic.reshape(-1)
        n = flat.size
        if max_coordinates is None or n <= max_coordinates:
            coords: Iterable[int] = range(n)
        else:
            coords = sorted(rng.choice(n, size=max_coordinates, replace=False))
        for i in coords:
            original = flat[i]
            flat[i] = original + step
            hi = f().item()
            flat[i] = original - step
            lo = f().item()
            flat[i] = original
            numeric = (hi - lo) / (2.0 * step)
            rel = abs(aflat[i] - numeric) / max(abs(aflat[i]), abs(numeric), 1e-12)
            worst = max(worst, rel)
    return worst
