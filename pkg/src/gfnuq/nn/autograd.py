"""Reverse-mode automatic differentiation over numpy arrays.

Every operation on a :class:`Tensor` records its parents and a closure that
pushes the output gradient back to them. :meth:`Tensor.backward` walks the
recorded graph in reverse topological order.

All arrays are float64.
"""

from __future__ import annotations

import numpy as np

from ..errors import UsageError


def _as_array(value):
    return np.asarray(value, dtype=np.float64)


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (undo numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    ndim_extra = grad.ndim - len(shape)
    if ndim_extra > 0:
        grad = grad.sum(axis=tuple(range(ndim_extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A float64 array that remembers how it was computed."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")
    __array_priority__ = 100.0

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None):
        self.data = _as_array(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.name = name

    def __repr__(self):
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{label})"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data.copy())

    # -- graph plumbing -------------------------------------------------

    @staticmethod
    def _make(data, parents, backward):
        if not any(p.requires_grad for p in parents):
            return Tensor(data)
        return Tensor(data, requires_grad=True, _parents=tuple(parents), _backward=backward)

    def _accumulate(self, grad):
        self.grad = np.array(grad) if self.grad is None else self.grad + grad

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every reachable leaf."""
        if not self.requires_grad:
            raise UsageError("backward() called on a tensor that is not on the tape")
        if grad is None:
            if self.data.size != 1:
                raise UsageError("backward() without an explicit gradient needs a scalar")
            grad = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
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
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        grads = {id(self): _as_array(grad)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node._accumulate(g)
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg

    # -- elementwise arithmetic ----------------------------------------

    def __add__(self, other):
        other = ensure_tensor(other)
        a, b = self, other

        def backward(g):
            return _filter(
                (a, b), (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))
            )

        return Tensor._make(a.data + b.data, (a, b), backward)

    __radd__ = __add__

    def __neg__(self):
        return Tensor._make(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        return self + (-ensure_tensor(other))

    def __rsub__(self, other):
        return ensure_tensor(other) + (-self)

    def __mul__(self, other):
        other = ensure_tensor(other)
        a, b = self, other

        def backward(g):
            return _filter(
                (a, b),
                (
                    _unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
                    _unbroadcast(g * a.data, b.shape) if b.requires_grad else None,
                ),
            )

        return Tensor._make(a.data * b.data, (a, b), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = ensure_tensor(other)
        a, b = self, other
        out = a.data / b.data

        def backward(g):
            return _filter(
                (a, b),
                (
                    _unbroadcast(g / b.data, a.shape) if a.requires_grad else None,
                    _unbroadcast(-g * out / b.data, b.shape) if b.requires_grad else None,
                ),
            )

        return Tensor._make(out, (a, b), backward)

    def __rtruediv__(self, other):
        return ensure_tensor(other) / self

    def __pow__(self, exponent):
        if isinstance(exponent, Tensor):
            raise UsageError("tensor exponents are not supported")
        p = float(exponent)
        x = self.data
        return Tensor._make(x**p, (self,), lambda g: (g * p * x ** (p - 1.0),))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        x = self

        def backward(g):
            full = np.zeros_like(x.data)
            np.add.at(full, index, g)
            return (full,)

        return Tensor._make(self.data[index], (self,), backward)

    # -- shape ----------------------------------------------------------

    def reshape(self, *shape):
        old = self.shape
        return Tensor._make(self.data.reshape(*shape), (self,), lambda g: (g.reshape(old),))

    @property
    def T(self):
        return self.transpose()

    def transpose(self, *axes):
        axes = axes or tuple(reversed(range(self.ndim)))
        inverse = np.argsort(axes)
        return Tensor._make(
            self.data.transpose(axes), (self,), lambda g: (g.transpose(inverse),)
        )

    # -- reductions -----------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        shape = self.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor._make(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else np.prod(
            [self.shape[a] for a in np.atleast_1d(axis)]
        )
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- pointwise functions --------------------------------------------

    def exp(self):
        out = np.exp(self.data)
        return Tensor._make(out, (self,), lambda g: (g * out,))

    def expm1(self):
        x = self.data
        return Tensor._make(np.expm1(x), (self,), lambda g: (g * np.exp(x),))

    def log(self):
        x = self.data
        return Tensor._make(np.log(x), (self,), lambda g: (g / x,))

    def relu(self):
        x = self.data
        return Tensor._make(np.maximum(x, 0.0), (self,), lambda g: (g * (x > 0.0),))

    def tanh(self):
        out = np.tanh(self.data)
        return Tensor._make(out, (self,), lambda g: (g * (1.0 - out * out),))

    def sigmoid(self):
        out = _sigmoid(self.data)
        return Tensor._make(out, (self,), lambda g: (g * out * (1.0 - out),))

    def clip(self, lo, hi):
        x = self.data
        inside = (x >= lo) & (x <= hi)
        return Tensor._make(np.clip(x, lo, hi), (self,), lambda g: (g * inside,))


def _filter(parents, grads):
    return tuple(g if p.requires_grad else None for p, g in zip(parents, grads))


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def ensure_tensor(value):
    return value if isinstance(value, Tensor) else Tensor(value)


def parameter(data, name=None):
    """A leaf tensor that collects gradients."""
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def matmul(a, b):
    a, b = ensure_tensor(a), ensure_tensor(b)

    def backward(g):
        ga = gb = None
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2) if b.ndim > 1 else np.multiply.outer(g, b.data)
            ga = _unbroadcast(ga, a.shape)
        if b.requires_grad:
            if a.ndim == 1:
                gb = np.multiply.outer(a.data, g)
            else:
                gb = np.swapaxes(a.data, -1, -2) @ g
            gb = _unbroadcast(gb, b.shape)
        return ga, gb

    return Tensor._make(a.data @ b.data, (a, b), backward)


def concat(tensors, axis=-1):
    tensors = [ensure_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._make(
        np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward
    )


def stack(tensors, axis=0):
    tensors = [ensure_tensor(t) for t in tensors]

    def backward(g):
        return tuple(np.moveaxis(g, axis, 0))

    return Tensor._make(
        np.stack([t.data for t in tensors], axis=axis), tuple(tensors), backward
    )



def where(condition, a, b):
    """Select ``a`` where ``condition`` else ``b``; the condition is constant."""
    cond = np.asarray(condition, dtype=bool)
    a, b = ensure_tensor(a), ensure_tensor(b)

    def backward(g):
        return _filter(
            (a, b),
            (_unbroadcast(g * cond, a.shape), _unbroadcast(g * ~cond, b.shape)),
        )

    return Tensor._make(np.where(cond, a.data, b.data), (a, b), backward)



def logsumexp(x, axis=-1, keepdims=False):
    x = ensure_tensor(x)
    m = np.max(x.data, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    s = np.sum(np.exp(x.data - m), axis=axis, keepdims=True)
    out = np.log(s) + m
    soft = np.exp(x.data - out)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (g * soft,)

    value = out if keepdims else np.squeeze(out, axis=axis)
    return Tensor._make(value, (x,), backward)


def log_softmax(logits, mask=None, axis=-1):
    """Log-probabilities of a softmax, with masked entries pinned to -inf.

    Masked entries get zero gradient. Rows with no valid entry are a usage error.
    """
    logits = ensure_tensor(logits)
    if mask is None:
        return logits - logsumexp(logits, axis=axis, keepdims=True)
    mask = np.asarray(mask, dtype=bool)
    if not np.all(mask.any(axis=axis)):
        raise UsageError("log_softmax: a row has no valid entries")
    x = np.where(mask, logits.data, -np.inf)
    m = np.max(x, axis=axis, keepdims=True)
    lse = np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True)) + m
    out = np.where(mask, x - lse, -np.inf)
    soft = np.where(mask, np.exp(out), 0.0)

    def backward(g):
        g = np.where(mask, g, 0.0)
        return (np.where(mask, g - soft * g.sum(axis=axis, keepdims=True), 0.0),)

    return Tensor._make(out, (logits,), backward)


def softmax(logits, mask=None, axis=-1):
    lp = log_softmax(logits, mask=mask, axis=axis)
    return lp.exp()


def softplus(x):
    x = ensure_tensor(x)
    out = np.logaddexp(0.0, x.data)
    return Tensor._make(out, (x,), lambda g: (g * _sigmoid(x.data),))


def log_sigmoid(x):
    return -softplus(-ensure_tensor(x))


def zero_grad(params):
    for p in params:
        p.grad = None


def backward(loss, params):
    """Backpropagate ``loss`` and return the gradient of every tensor in ``params``.

    Parameters that the loss does not depend on get a zero gradient.
    """
    if not isinstance(loss, Tensor) or not loss.requires_grad:
        raise UsageError("loss is not on the tape (no recorded dependence on parameters)")
    zero_grad(params)
    loss.backward()
    return [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
