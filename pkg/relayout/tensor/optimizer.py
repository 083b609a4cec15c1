#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

import logging
import math
from collections import OrderedDict
import numpy as np
from relayout.util import log_timing

logger = logging.getLogger(__name__)


class OptimizerState(object):
    """
    AdamW hyper-parameters and per-parameter moment buffers.

    :param params: ordered mapping of name -> Tensor
    :param lr: learning rate
    :param weight_decay: decoupled weight decay coefficient
    :param beta1: decay of the first moment
    :param beta2: decay of the second moment
    :param eps: added to the root of the second moment

    """
    def __init__(self, params, lr=1e-3, weight_decay=1e-2,
                 beta1=0.9, beta2=0.999, eps=1e-8):
        if lr < 0:
            raise ValueError('lr must be >= 0')
        if weight_decay < 0:
            raise ValueError('weight_decay must be >= 0')
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise ValueError('betas must be in [0, 1)')
        if eps <= 0:
            raise ValueError('eps must be > 0')
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m = OrderedDict(
            (name, np.zeros_like(p.data)) for name, p in params.items())
        self.v = OrderedDict(
            (name, np.zeros_like(p.data)) for name, p in params.items())


def adamw_step(params, state, lr=None):
    """
    Apply one AdamW update in place.

    :param params: ordered mapping of name -> Tensor with populated grads
    :param state: :class:`OptimizerState` created for ``params``
    :param lr: learning rate for this step; defaults to ``state.lr``

    Weight decay is decoupled: the weights are shrunk by
    ``lr * weight_decay`` directly instead of adding a decay term to the
    gradient. Moments are bias corrected.
    """
    for name, param in params.items():
        if param.grad is None:
            raise RuntimeError(
                'adamw_step: parameter {} has no gradient'.format(name))
        if name not in state.m:
            raise RuntimeError(
                'adamw_step: no optimizer state for parameter {}'.format(name))

    lr = state.lr if lr is None else lr
    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step

    for name, param in params.items():
        grad = param.grad
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad

        m_hat = m / correction1
        v_hat = v / correction2

        if state.weight_decay:
            param.data *= (1.0 - lr * state.weight_decay)
        param.data -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


class LinearDecaySchedule(object):
    """
    Learning rate falling linearly from ``base_lr`` to zero.

    :param base_lr: learning rate at step 0
    :param total_steps: number of optimizer steps in the run

    """
    def __init__(self, base_lr, total_steps):
        if total_steps <= 0:
            raise ValueError('total_steps must be > 0')
        self.base_lr = base_lr
        self.total_steps = total_steps

    def __call__(self, step):
        frac = 1.0 - float(step) / self.total_steps
        return self.base_lr * max(frac, 0.0)


class AdamW(object):
    """
    AdamW bound to a set of parameters and a linear-decay schedule.

    :param params: ordered mapping of name -> Tensor
    :param total_steps: steps over which the learning rate decays to zero,
                        or ``None`` for a constant learning rate

    Remaining keyword arguments go to :class:`OptimizerState`.
    """
    def __init__(self, params, total_steps=None, **kwargs):
        self.params = params
        self.state = OptimizerState(params, **kwargs)
        self.schedule = (LinearDecaySchedule(self.state.lr, total_steps)
                         if total_steps else None)

    @property
    def current_lr(self):
        if self.schedule is None:
            return self.state.lr
        return self.schedule(self.state.step)

    def zero_grad(self):
        for param in self.params.values():
            param.zero_grad()

    @log_timing(logger)
    def step(self):
        lr = self.current_lr
        adamw_step(self.params, self.state, lr=lr)
        return lr


def grad_norm(params):
    """Global L2 norm of the gradients, for logging."""
    total = 0.0
    for param in params.values():
        if param.grad is not None:
            total += float((param.grad * param.grad).sum())
    return math.sqrt(total)
