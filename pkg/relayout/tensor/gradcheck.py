#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

"""
Central finite-difference checks of the analytic gradients.

:func:`grad_check` compares the gradient from :func:`backward` with
``(f(x + h) - f(x - h)) / 2h`` for every coordinate of every input that
requires a gradient, and returns the largest relative error

    ``|analytic - numeric| / max(1, |analytic|, |numeric|)``

Finite differences see straight through a stop-gradient, so cases that
carry ``expected`` gradients are compared against those instead.

:func:`primitive_checks` builds the suite used by ``relayout gradcheck
--scope primitives``; the encoder and loss suites live next to the code
they check.
"""

import logging
from collections import namedtuple
import numpy as np
from relayout.tensor import tensor as T

logger = logging.getLogger(__name__)

GradCheckCase = namedtuple('GradCheckCase', 'name func inputs expected')
GradCheckCase.__new__.__defaults__ = (None,)
GradCheckResult = namedtuple('GradCheckResult', 'name max_error passed')


def grad_check(func, inputs, h=1e-5, tol=None):
    """
    Largest relative error between analytic and numeric gradients.

    :param func: callable taking ``inputs`` and returning a scalar Tensor
    :param inputs: list of Tensors; those with ``requires_grad`` are checked
    :param h: finite-difference step
    :param tol: if given, log a warning when the error exceeds it
    :return: max relative error over all checked coordinates

    """
    for tensor in inputs:
        tensor.grad = None
    loss = func(*inputs)
    T.backward(loss)
    analytic = [None if t.grad is None else t.grad.copy() for t in inputs]

    max_error = 0.0
    for tensor, grad in zip(inputs, analytic):
        if not tensor.requires_grad:
            continue
        if grad is None:
            grad = np.zeros_like(tensor.data)
        flat = tensor.data.reshape(-1)
        flat_grad = grad.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            plus = func(*inputs).item()
            flat[i] = old - h
            minus = func(*inputs).item()
            flat[i] = old
            numeric = (plus - minus) / (2.0 * h)
            error = (abs(flat_grad[i] - numeric) /
                     max(1.0, abs(flat_grad[i]), abs(numeric)))
            max_error = max(max_error, error)

    if tol is not None and max_error > tol:
        logger.warning('gradient check error %g exceeds tolerance %g',
                       max_error, tol)
    return max_error


def expected_grad_check(func, inputs, expected):
    """
    Largest relative error between analytic and given gradients.

    :param func: callable taking ``inputs`` and returning a scalar Tensor
    :param inputs: list of Tensors
    :param expected: one array per input; ``None`` means all zeros
    """
    for tensor in inputs:
        tensor.grad = None
    T.backward(func(*inputs))
    max_error = 0.0
    for tensor, want in zip(inputs, expected):
        got = (np.zeros_like(tensor.data) if tensor.grad is None
               else tensor.grad)
        want = np.zeros_like(tensor.data) if want is None else want
        error = np.abs(got - want) / np.maximum(
            1.0, np.maximum(np.abs(got), np.abs(want)))
        max_error = max(max_error, float(np.max(error)))
    return max_error


def run_checks(cases, h=1e-5, tol=1e-4):
    """Run a list of :class:`GradCheckCase` and collect the results."""
    results = []
    for case in cases:
        if case.expected is None:
            error = grad_check(case.func, case.inputs, h=h)
        else:
            error = expected_grad_check(case.func, case.inputs, case.expected)
        logger.info('gradcheck %s: max relative error %.3e', case.name, error)
        results.append(GradCheckResult(case.name, error, error <= tol))
    return results


def _param(rng, *shape):
    return T.Tensor(rng.normal(size=shape), requires_grad=True)


def _away_from_zero(rng, *shape):
    # relu and friends are only differentiable away from the kink
    values = rng.uniform(0.1, 1.0, size=shape)
    signs = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return T.Tensor(values * signs, requires_grad=True)


def _projected(op, weights):
    # reduce a tensor-valued op to a scalar with fixed random weights so
    # that every entry of the Jacobian contributes
    def func(*args):
        return T.sum_(T.mul(op(*args), weights))
    return func


def primitive_checks(rng):
    """Cases covering every differentiable primitive at random inputs."""
    cases = []
    w34 = T.Tensor(rng.normal(size=(3, 4)))
    w33 = T.Tensor(rng.normal(size=(3, 3)))
    w8 = T.Tensor(rng.normal(size=8))
    w4 = T.Tensor(rng.normal(size=4))

    cases.append(GradCheckCase(
        'matmul', _projected(T.matmul, w34),
        [_param(rng, 3, 5), _param(rng, 5, 4)]))
    cases.append(GradCheckCase(
        'add', _projected(T.add, w34),
        [_param(rng, 3, 4), _param(rng, 4)]))
    cases.append(GradCheckCase(
        'sub', _projected(T.sub, w34),
        [_param(rng, 3, 4), _param(rng, 3, 1)]))
    cases.append(GradCheckCase(
        'mul', _projected(T.mul, w34),
        [_param(rng, 3, 4), _param(rng, 3, 4)]))
    cases.append(GradCheckCase(
        'div', _projected(T.div, w34),
        [_param(rng, 3, 4), T.Tensor(rng.uniform(1.0, 2.0, size=(3, 4)),
                                     requires_grad=True)]))
    cases.append(GradCheckCase(
        'relu', _projected(T.relu, w34), [_away_from_zero(rng, 3, 4)]))
    cases.append(GradCheckCase(
        'gelu', _projected(T.gelu, w34), [_param(rng, 3, 4)]))
    cases.append(GradCheckCase(
        'tanh', _projected(T.tanh, w34), [_param(rng, 3, 4)]))
    cases.append(GradCheckCase(
        'softmax', _projected(lambda x: T.softmax(x, axis=-1), w34),
        [_param(rng, 3, 4)]))
    cases.append(GradCheckCase(
        'layer_norm', _projected(lambda x: T.layer_norm(x, axis=-1), w8),
        [_param(rng, 8)]))
    ids = rng.integers(0, 6, size=3)
    cases.append(GradCheckCase(
        'embedding_lookup',
        _projected(lambda table: T.embedding_lookup(table, ids), w34),
        [_param(rng, 6, 4)]))
    cases.append(GradCheckCase(
        'mean_pool',
        _projected(lambda x: T.mean_pool(x, [0, 2, 3]), w4),
        [_param(rng, 5, 4)]))
    targets = rng.integers(0, 4, size=3)
    cases.append(GradCheckCase(
        'cross_entropy', lambda x: T.cross_entropy(x, targets),
        [_param(rng, 3, 4)]))
    cases.append(GradCheckCase(
        'cosine_sim', T.cosine_sim, [_param(rng, 6), _param(rng, 6)]))
    cases.append(GradCheckCase(
        'concat', _projected(lambda a, b: T.concat([a, b], axis=1), w34),
        [_param(rng, 3, 1), _param(rng, 3, 3)]))
    cases.append(GradCheckCase(
        'slice', _projected(lambda x: x[1:4, :], w34),
        [_param(rng, 5, 4)]))
    cases.append(GradCheckCase(
        'transpose', _projected(T.transpose, w34), [_param(rng, 4, 3)]))
    cases.append(GradCheckCase(
        'reshape', _projected(lambda x: T.reshape(x, (3, 4)), w34),
        [_param(rng, 2, 6)]))
    cases.append(GradCheckCase(
        'stack', _projected(lambda a, b, c: T.stack([a, b, c]), w33),
        [_param(rng, 3), _param(rng, 3), _param(rng, 3)]))
    cases.append(GradCheckCase(
        'mean', lambda x: T.mean(T.mul(x, w34)), [_param(rng, 3, 4)]))
    cases.append(GradCheckCase(
        'neg', _projected(T.neg, w34), [_param(rng, 3, 4)]))
    w3 = T.Tensor(rng.normal(size=3))
    cases.append(GradCheckCase(
        'sum', lambda x: T.sum_(T.mul(x, w34)), [_param(rng, 3, 4)]))
    cases.append(GradCheckCase(
        'sum_axis', _projected(lambda x: T.sum_(x, axis=1), w3),
        [_param(rng, 3, 4)]))
    # the detached branch must contribute nothing: only w4 comes back
    cases.append(GradCheckCase(
        'detach',
        lambda x: T.add(T.sum_(T.mul(T.detach(x), w34)),
                        T.sum_(T.mul(x, w4))),
        [_param(rng, 3, 4)],
        [np.broadcast_to(w4.data, (3, 4))]))
    return cases
