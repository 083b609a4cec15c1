#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

"""
Dense float64 tensors with define-by-run reverse-mode differentiation.

Every primitive below computes its forward value with numpy and, when any
input requires a gradient, records the inputs and a backward closure on the
result. Calling :func:`backward` on a scalar loss builds a :class:`Tape`
(the topologically ordered record of every tensor reachable from the loss)
and replays it in reverse, accumulating ``grad`` on leaf tensors.

:func:`detach` is the stop-gradient primitive: its output has the same
values as its input, and it passes back exactly zero.
"""

import logging
import math
import numpy as np
from scipy import special
from relayout.util import log_timing

logger = logging.getLogger(__name__)

GELU_COEFF = math.sqrt(2.0 / math.pi)
GELU_CUBIC = 0.044715
COSINE_EPS = 1e-12


class Tensor(object):
    """
    An n-dimensional float64 array that can take part in differentiation.

    :param data: array-like values, copied into row-major float64 storage
    :param requires_grad: whether ``grad`` is accumulated for this leaf
    :param name: optional label used in error messages and checkpoints

    """
    # make numpy defer to our reflected operators
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._parents = ()
        self._backward = None
        self._op = None

    #
    # properties
    #
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def T(self):
        return transpose(self)

    @property
    def is_leaf(self):
        return self._backward is None

    def item(self):
        if self.data.size != 1:
            raise RuntimeError(
                'item: tensor of shape {} is not a scalar'.format(self.shape))
        return float(self.data.reshape(()))

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return 'Tensor(shape={}, requires_grad={}, op={})'.format(
            self.shape, self.requires_grad, self._op)

    #
    # operators
    #
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    __div__ = __truediv__
    __rdiv__ = __rtruediv__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return slice_(self, index)

    def sum(self, axis=None):
        return sum_(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(value):
    """Wrap constants; tensors pass through unchanged."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _make(data, parents, backward, op):
    out = Tensor(data)
    out._op = op
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(op, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise RuntimeError(
            '{}: shapes {} and {} cannot be broadcast together'.format(
                op, a.shape, b.shape))


#
# elementwise arithmetic
#
def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast('add', a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return _make(a.data + b.data, (a, b), backward, 'add')


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast('sub', a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
    return _make(a.data - b.data, (a, b), backward, 'sub')


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast('mul', a, b)

    def backward(g):
        return (_unbroadcast(g * b.data, a.shape),
                _unbroadcast(g * a.data, b.shape))
    return _make(a.data * b.data, (a, b), backward, 'mul')


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast('div', a, b)

    def backward(g):
        return (_unbroadcast(g / b.data, a.shape),
                _unbroadcast(-g * a.data / (b.data * b.data), b.shape))
    return _make(a.data / b.data, (a, b), backward, 'div')


def neg(a):
    a = as_tensor(a)

    def backward(g):
        return (-g,)
    return _make(-a.data, (a,), backward, 'neg')


#
# linear algebra and shape manipulation
#
def matmul(a, b):
    """Product of two 2D tensors, ``(n, k) @ (k, m) -> (n, m)``."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise RuntimeError(
            'matmul: shapes {} and {} are incompatible'.format(
                a.shape, b.shape))

    def backward(g):
        return g.dot(b.data.T), a.data.T.dot(g)
    return _make(a.data.dot(b.data), (a, b), backward, 'matmul')


def transpose(a):
    a = as_tensor(a)
    if a.ndim != 2:
        raise RuntimeError(
            'transpose: expected a 2D tensor, got shape {}'.format(a.shape))

    def backward(g):
        return (g.T,)
    return _make(a.data.T, (a,), backward, 'transpose')


def reshape(a, shape):
    a = as_tensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise RuntimeError(
            'reshape: cannot reshape {} into {}'.format(a.shape, shape))

    def backward(g):
        return (g.reshape(a.shape),)
    return _make(data, (a,), backward, 'reshape')


def slice_(a, index):
    """Basic or advanced numpy indexing of ``a``."""
    a = as_tensor(a)
    try:
        data = a.data[index]
    except IndexError as e:
        raise RuntimeError(
            'slice: index {!r} invalid for shape {}: {}'.format(
                index, a.shape, e))

    def backward(g):
        grad = np.zeros_like(a.data)
        np.add.at(grad, index, g)
        return (grad,)
    return _make(np.array(data), (a,), backward, 'slice')


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise RuntimeError('concat: nothing to concatenate')
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise RuntimeError(
            'concat: shapes {} cannot be joined on axis {}'.format(
                [t.shape for t in tensors], axis))
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))
    return _make(data, tensors, backward, 'concat')


def stack(tensors):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise RuntimeError('stack: nothing to stack')
    shapes = set(t.shape for t in tensors)
    if len(shapes) != 1:
        raise RuntimeError(
            'stack: all shapes must match, got {}'.format(sorted(shapes)))
    data = np.stack([t.data for t in tensors], axis=0)

    def backward(g):
        return tuple(g[i] for i in range(len(tensors)))
    return _make(data, tensors, backward, 'stack')


#
# reductions
#
def sum_(a, axis=None):
    a = as_tensor(a)

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)
    return _make(a.data.sum(axis=axis), (a,), backward, 'sum')


def mean(a, axis=None):
    a = as_tensor(a)
    count = a.data.size if axis is None else a.shape[axis]
    if count == 0:
        raise RuntimeError('mean: empty reduction over shape {}'.format(
            a.shape))

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, a.shape).copy(),)
    return _make(a.data.mean(axis=axis), (a,), backward, 'mean')


def mean_pool(a, rows):
    """Average of the selected rows of a 2D tensor."""
    a = as_tensor(a)
    rows = np.asarray(list(rows), dtype=np.int64)
    if rows.size == 0:
        raise RuntimeError('mean_pool: no rows selected')
    if a.ndim != 2:
        raise RuntimeError(
            'mean_pool: expected a 2D tensor, got shape {}'.format(a.shape))
    if rows.min() < 0 or rows.max() >= a.shape[0]:
        raise RuntimeError(
            'mean_pool: rows {} out of range for shape {}'.format(
                rows.tolist(), a.shape))

    def backward(g):
        grad = np.zeros_like(a.data)
        np.add.at(grad, rows, g / rows.size)
        return (grad,)
    return _make(a.data[rows].mean(axis=0), (a,), backward, 'mean_pool')


#
# nonlinearities
#
def relu(a):
    a = as_tensor(a)
    mask = a.data > 0

    def backward(g):
        return (g * mask,)
    return _make(a.data * mask, (a,), backward, 'relu')


def tanh(a):
    a = as_tensor(a)
    t = np.tanh(a.data)

    def backward(g):
        return (g * (1.0 - t * t),)
    return _make(t, (a,), backward, 'tanh')


def gelu(a):
    """
    GELU, tanh approximation.

    ``0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))``
    """
    a = as_tensor(a)
    x = a.data
    inner = GELU_COEFF * (x + GELU_CUBIC * x ** 3)
    t = np.tanh(inner)

    def backward(g):
        d_inner = GELU_COEFF * (1.0 + 3.0 * GELU_CUBIC * x * x)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner),)
    return _make(0.5 * x * (1.0 + t), (a,), backward, 'gelu')


def softmax(a, axis=-1):
    a = as_tensor(a)
    s = special.softmax(a.data, axis=axis)

    def backward(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)
    return _make(s, (a,), backward, 'softmax')


def layer_norm(a, axis=-1, eps=1e-12):
    """Normalize to zero mean and unit variance along ``axis`` (no affine)."""
    a = as_tensor(a)
    mu = a.data.mean(axis=axis, keepdims=True)
    centered = a.data - mu
    var = (centered * centered).mean(axis=axis, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std

    def backward(g):
        g_mean = g.mean(axis=axis, keepdims=True)
        gx_mean = (g * xhat).mean(axis=axis, keepdims=True)
        return (inv_std * (g - g_mean - xhat * gx_mean),)
    return _make(xhat, (a,), backward, 'layer_norm')


def dropout(a, prob, rng):
    """Inverted dropout; the keep mask is a constant of the graph."""
    a = as_tensor(a)
    if prob <= 0.0:
        return a
    if prob >= 1.0:
        raise RuntimeError('dropout: prob must be < 1, got {}'.format(prob))
    keep = (rng.random(a.shape) >= prob) / (1.0 - prob)
    return mul(a, Tensor(keep))


#
# lookups and losses
#
def embedding_lookup(table, ids):
    """Rows of ``table`` selected by integer ``ids``."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if table.ndim != 2:
        raise RuntimeError(
            'embedding_lookup: table must be 2D, got shape {}'.format(
                table.shape))
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        bad = ids[(ids < 0) | (ids >= table.shape[0])][0]
        raise RuntimeError(
            'embedding_lookup: id {} out of range for table {} of {} rows'
            .format(int(bad), table.name, table.shape[0]))

    def backward(g):
        grad = np.zeros_like(table.data)
        np.add.at(grad, ids, g)
        return (grad,)
    return _make(table.data[ids], (table,), backward, 'embedding_lookup')


def cross_entropy(logits, targets):
    """
    Mean negative log-likelihood of ``targets`` under ``softmax(logits)``.

    :param logits: ``(n, V)`` tensor, or ``(V,)`` for a single row
    :param targets: ``n`` integer class ids, or one id
    :return: scalar tensor
    """
    logits = as_tensor(logits)
    if logits.ndim == 1:
        logits = reshape(logits, (1, logits.shape[0]))
    targets = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    n, n_classes = logits.shape
    if targets.shape != (n,):
        raise RuntimeError(
            'cross_entropy: {} targets for logits of shape {}'.format(
                targets.size, logits.shape))
    if n == 0:
        raise RuntimeError('cross_entropy: no rows')
    if targets.min() < 0 or targets.max() >= n_classes:
        raise RuntimeError(
            'cross_entropy: target out of range [0, {})'.format(n_classes))

    log_z = special.logsumexp(logits.data, axis=1)
    picked = logits.data[np.arange(n), targets]
    value = np.mean(log_z - picked)

    def backward(g):
        probs = np.exp(logits.data - log_z[:, np.newaxis])
        probs[np.arange(n), targets] -= 1.0
        return (g * probs / n,)
    return _make(value, (logits,), backward, 'cross_entropy')


def cosine_similarity(u, v):
    """Cosine of two numpy vectors; the forward of :func:`cosine_sim`."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    denom = max(np.linalg.norm(u) * np.linalg.norm(v), COSINE_EPS)
    return float(u.dot(v) / denom)


def cosine_sim(u, v):
    """Cosine similarity of two 1D tensors as a scalar tensor."""
    u, v = as_tensor(u), as_tensor(v)
    if u.ndim != 1 or u.shape != v.shape:
        raise RuntimeError(
            'cosine_sim: expected two equal-length vectors, got {} and {}'
            .format(u.shape, v.shape))
    nu = np.linalg.norm(u.data)
    nv = np.linalg.norm(v.data)
    denom = max(nu * nv, COSINE_EPS)
    value = cosine_similarity(u.data, v.data)

    def backward(g):
        if nu * nv < COSINE_EPS:
            return g * v.data / denom, g * u.data / denom
        grad_u = v.data / denom - value * u.data / (nu * nu)
        grad_v = u.data / denom - value * v.data / (nv * nv)
        return g * grad_u, g * grad_v
    return _make(value, (u, v), backward, 'cosine_sim')


def detach(a):
    """
    Stop-gradient.

    The output equals ``a`` bit for bit; the backward pass sends exactly
    zero to ``a``.
    """
    a = as_tensor(a)

    def backward(g):
        return (np.zeros_like(a.data),)
    return _make(a.data.copy(), (a,), backward, 'detach')


#
# backward pass
#
class Tape(object):
    """
    Ordered record of the computation that produced ``loss``.

    ``records`` lists every tensor reachable from the loss so that each
    tensor appears after all of its parents. :meth:`replay` walks the
    record backwards and accumulates gradients into the leaves.

    :param loss: scalar tensor at the end of the computation

    """
    def __init__(self, loss):
        self.loss = loss
        self.records = self._topological_order(loss)

    @property
    def leaves(self):
        return [t for t in self.records if t.is_leaf and t.requires_grad]

    @log_timing(logger)
    def replay(self):
        """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every leaf."""
        grads = {id(self.loss): np.ones_like(self.loss.data)}
        for node in reversed(self.records):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                if node.requires_grad:
                    if node.grad is None:
                        node.grad = np.array(g, dtype=np.float64)
                    else:
                        node.grad = node.grad + g
                continue
            parent_grads = node._backward(g)
            for parent, parent_grad in zip(node._parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + parent_grad
                else:
                    grads[key] = parent_grad

    @staticmethod
    def _topological_order(loss):
        order = []
        visited = set()
        # iterative post-order walk; deep graphs would overflow recursion
        stack = [(loss, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return order


def backward(loss):
    """
    Populate ``grad`` on every leaf that ``loss`` depends on.

    :param loss: scalar tensor
    :return: the replayed :class:`Tape`
    """
    if not isinstance(loss, Tensor) or loss.data.size != 1:
        shape = loss.shape if isinstance(loss, Tensor) else type(loss)
        raise RuntimeError(
            'backward: loss must be a scalar tensor, got {}'.format(shape))
    tape = Tape(loss)
    tape.replay()
    return tape
