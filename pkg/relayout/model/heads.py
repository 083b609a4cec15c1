#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

"""
Task heads on top of the encoder.

All heads live in the same :class:`ModelParams` as the encoder, under a
prefix naming the head:

``mlm``
    dense d->d, GELU, layer norm, dense d->V
``lop``
    same pattern with ``max_local_pos`` classes
``predictor``
    the 2-TSC map d->bottleneck->d, applied per token
``sec``
    linear d->number of BIO tags
``qa``
    start and end scorers, each linear d->1
"""

import numpy as np
from relayout.model.encoder import gaussian
from relayout.tensor import tensor as T
from relayout.util import make_rng, STREAM_INIT

# stream offsets keep each head's initialization independent of the others
HEAD_STREAMS = {'mlm': 1, 'lop': 2, 'predictor': 3, 'sec': 4, 'qa': 5}
PRETRAIN_HEADS = ('mlm', 'lop', 'predictor')


def _head_rng(seed, head):
    return make_rng(seed, STREAM_INIT, HEAD_STREAMS[head])


def _add_dense(params, prefix, n_in, n_out, rng):
    params.add(prefix + '.w',
               gaussian(rng, params.config.init_std, (n_in, n_out)))
    params.add(prefix + '.b', np.zeros(n_out))


def _dense(params, prefix, x):
    return T.add(T.matmul(x, params[prefix + '.w']), params[prefix + '.b'])


def _add_transform_head(params, prefix, n_out, rng):
    d = params.config.hidden_dim
    _add_dense(params, prefix + '.dense', d, d, rng)
    _add_dense(params, prefix + '.out', d, n_out, rng)


def _transform_head(params, prefix, reps):
    hidden = T.layer_norm(T.gelu(_dense(params, prefix + '.dense', reps)))
    return _dense(params, prefix + '.out', hidden)


def add_head(params, head, seed, n_out=None):
    """
    Create the parameters of ``head`` in ``params``.

    :param params: :class:`ModelParams`
    :param head: one of ``mlm``, ``lop``, ``predictor``, ``sec``, ``qa``
    :param seed: run seed
    :param n_out: number of tags for ``sec``
    """
    if head not in HEAD_STREAMS:
        raise RuntimeError('unknown head {!r}'.format(head))
    cfg = params.config
    rng = _head_rng(seed, head)
    if head == 'mlm':
        _add_transform_head(params, 'mlm', cfg.vocab_size, rng)
    elif head == 'lop':
        _add_transform_head(params, 'lop', cfg.max_local_pos, rng)
    elif head == 'predictor':
        _add_dense(params, 'predictor.hidden', cfg.hidden_dim,
                   cfg.bottleneck_dim, rng)
        _add_dense(params, 'predictor.out', cfg.bottleneck_dim,
                   cfg.hidden_dim, rng)
    elif head == 'sec':
        if n_out is None:
            raise RuntimeError('the sec head needs the number of tags')
        _add_dense(params, 'sec', cfg.hidden_dim, n_out, rng)
    else:
        _add_dense(params, 'qa.start', cfg.hidden_dim, 1, rng)
        _add_dense(params, 'qa.end', cfg.hidden_dim, 1, rng)


def add_pretrain_heads(params, seed):
    for head in PRETRAIN_HEADS:
        add_head(params, head, seed)
    return params


def mlm_logits(params, reps):
    """``(J, V)`` logits for the representation rows ``reps``."""
    return _transform_head(params, 'mlm', reps)


def lop_logits(params, reps):
    """``(M, max_local_pos)`` logits; class ``c`` is local position ``c + 1``."""
    return _transform_head(params, 'lop', reps)


def predictor(params, reps):
    hidden = T.gelu(_dense(params, 'predictor.hidden', reps))
    return _dense(params, 'predictor.out', hidden)


def sec_logits(params, reps):
    return _dense(params, 'sec', reps)


def qa_scores(params, reps):
    """Start and end scores, each a Tensor of shape ``(N,)``."""
    n = reps.shape[0]
    start = T.reshape(_dense(params, 'qa.start', reps), (n,))
    end = T.reshape(_dense(params, 'qa.end', reps), (n,))
    return start, end
