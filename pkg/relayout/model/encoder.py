#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

"""
Layout-aware transformer encoder.

The input embedding of token ``n`` is the sum of a token embedding, a
global 1D position embedding and a 2D box embedding. The box embedding
itself sums six lookups: ``x0``, ``y0``, ``x1``, ``y1``, width and height,
all on the 0-1000 grid. Row ``max_seq_len + 1`` of the 1D table stands for
a masked position; row 0 is used by padding.

The encoder is a stack of pre-norm blocks (self-attention and a GELU
feed-forward layer, each wrapped in a residual connection) followed by a
final layer norm. Layer norms carry no gain or bias.
"""

import logging
import math
from collections import OrderedDict, namedtuple
import numpy as np
from relayout import options
from relayout.options import option
from relayout.document.doc_model import (TokenizedDocument, segment_boxes,
                                         GRID_MAX)
from relayout.document.tokenizer import (FIRST_MERGE_ID, DEFAULT_MERGE_COUNT,
                                         SPECIAL_IDS)
from relayout.tensor import tensor as T
from relayout.tensor.gradcheck import GradCheckCase
from relayout.util import make_rng, log_timing, STREAM_INIT

logger = logging.getLogger(__name__)

BOX_FEATURES = ('x0', 'y0', 'x1', 'y1', 'width', 'height')
ATTENTION_MASK_BIAS = -1e9


class EncoderConfig(options.Options):
    """
    Shape of the encoder.

    ``predictor_dim`` of ``None`` gives the 2-TSC predictor a bottleneck of
    ``hidden_dim // 4``.
    """
    _fields_ = (
        ('vocab_size', FIRST_MERGE_ID + DEFAULT_MERGE_COUNT),
        ('hidden_dim', 64),
        ('layers', 2),
        ('heads', 4),
        ('ffn_dim', 128),
        ('max_seq_len', 512),
        ('max_local_pos', 128),
        ('grid_size', GRID_MAX + 1),
        ('dropout_prob', 0.1),
        ('init_std', 0.02),
        ('predictor_dim', None),
    )

    vocab_size = option('vocab_size', options.is_positive_int,
                        'be an integer > 0')
    hidden_dim = option('hidden_dim', options.is_positive_int,
                        'be an integer > 0')
    layers = option('layers', options.is_non_negative_int,
                    'be an integer >= 0')
    heads = option('heads', options.is_positive_int, 'be an integer > 0')
    ffn_dim = option('ffn_dim', options.is_positive_int, 'be an integer > 0')
    max_seq_len = option('max_seq_len', options.is_positive_int,
                         'be an integer > 0')
    max_local_pos = option('max_local_pos', options.is_positive_int,
                           'be an integer > 0')
    grid_size = option('grid_size', options.is_positive_int,
                       'be an integer > 0')
    dropout_prob = option('dropout_prob',
                          lambda v: options.is_probability(v) and v < 1.0,
                          'be in [0, 1)')
    init_std = option('init_std', options.is_non_negative,
                      'be a number >= 0')
    predictor_dim = option(
        'predictor_dim', lambda v: v is None or options.is_positive_int(v),
        'be null or an integer > 0')

    @property
    def head_dim(self):
        return self.hidden_dim // self.heads

    @property
    def bottleneck_dim(self):
        if self.predictor_dim is not None:
            return self.predictor_dim
        return max(self.hidden_dim // 4, 1)

    @property
    def masked_position_id(self):
        return self.max_seq_len + 1

    def sanity_check(self):
        if self.hidden_dim % self.heads:
            raise ValueError(
                'hidden_dim ({}) must be divisible by heads ({})'.format(
                    self.hidden_dim, self.heads))


class ModelParams(object):
    """
    Named trainable tensors of the encoder and its heads.

    :param config: :class:`EncoderConfig`
    :param tensors: optional ordered mapping of name -> Tensor

    """
    def __init__(self, config, tensors=None):
        self.config = config
        self.tensors = OrderedDict() if tensors is None else tensors

    def add(self, name, data):
        if name in self.tensors:
            raise RuntimeError('parameter {} already exists'.format(name))
        tensor = T.Tensor(data, requires_grad=True, name=name)
        self.tensors[name] = tensor
        return tensor

    def __getitem__(self, name):
        try:
            return self.tensors[name]
        except KeyError:
            raise RuntimeError('unknown parameter {}'.format(name))

    def __contains__(self, name):
        return name in self.tensors

    def __len__(self):
        return len(self.tensors)

    @property
    def names(self):
        return list(self.tensors)

    def has_head(self, prefix):
        return any(name.startswith(prefix + '.') for name in self.tensors)

    def select(self, prefixes=None):
        """Ordered name -> Tensor for names under any of ``prefixes``."""
        if prefixes is None:
            return OrderedDict(self.tensors)
        return OrderedDict(
            (name, t) for name, t in self.tensors.items()
            if any(name == p or name.startswith(p + '.') for p in prefixes))

    def arrays(self):
        return OrderedDict((name, t.data) for name, t in self.tensors.items())

    @classmethod
    def from_arrays(cls, config, arrays):
        params = cls(config)
        for name, data in arrays.items():
            params.add(name, data)
        return params

    def copy(self):
        return self.from_arrays(self.config, OrderedDict(
            (name, data.copy()) for name, data in self.arrays().items()))

    def check_finite(self):
        for name, t in self.tensors.items():
            if not np.all(np.isfinite(t.data)):
                raise RuntimeError(
                    'parameter {} has non-finite values'.format(name))


def gaussian(rng, std, shape):
    return rng.normal(0.0, std, size=shape)


def init_params(cfg, seed):
    """
    Encoder parameters with Gaussian weights and zero biases.

    :param cfg: :class:`EncoderConfig`
    :param seed: run seed; parameters come from stream ``STREAM_INIT``
    :return: :class:`ModelParams` without any task head

    """
    cfg.sanity_check()
    rng = make_rng(seed, STREAM_INIT)
    d = cfg.hidden_dim
    std = cfg.init_std
    params = ModelParams(cfg)

    params.add('embeddings.token', gaussian(rng, std, (cfg.vocab_size, d)))
    params.add('embeddings.pos1d',
               gaussian(rng, std, (cfg.max_seq_len + 2, d)))
    for feature in BOX_FEATURES:
        params.add('embeddings.{}'.format(feature),
                   gaussian(rng, std, (cfg.grid_size, d)))

    for layer in range(cfg.layers):
        prefix = 'layer_{}'.format(layer)
        for proj in ('q', 'k', 'v', 'o'):
            params.add('{}.attn.w{}'.format(prefix, proj),
                       gaussian(rng, std, (d, d)))
            params.add('{}.attn.b{}'.format(prefix, proj), np.zeros(d))
        params.add('{}.ffn.w1'.format(prefix),
                   gaussian(rng, std, (d, cfg.ffn_dim)))
        params.add('{}.ffn.b1'.format(prefix), np.zeros(cfg.ffn_dim))
        params.add('{}.ffn.w2'.format(prefix),
                   gaussian(rng, std, (cfg.ffn_dim, d)))
        params.add('{}.ffn.b2'.format(prefix), np.zeros(d))
    return params


ModelInputs = namedtuple('ModelInputs',
                         'token_ids position_ids boxes attention_mask')


def build_inputs(doc, cfg, mask_plan=None, box_source='word', pad_to=None):
    """
    Model inputs for a tokenized document.

    :param doc: :class:`TokenizedDocument`
    :param cfg: :class:`EncoderConfig`
    :param mask_plan: optional plan whose ``input_ids`` replace the token
                      ids and whose ``masked_position_tokens`` get the
                      masked-position row
    :param box_source: ``'word'`` for word boxes, ``'segment'`` for every
                       token carrying its segment's merged box
    :param pad_to: pad with ``[pad]`` tokens to this length
    :return: :class:`ModelInputs`

    Only tokenized OCR-level documents are accepted; ground truth never
    reaches the model.
    """
    if not isinstance(doc, TokenizedDocument):
        raise TypeError(
            'build_inputs accepts a TokenizedDocument, got {}'.format(
                type(doc).__name__))
    n = doc.num_tokens
    if n > cfg.max_seq_len:
        raise RuntimeError(
            'document has {} tokens, more than max_seq_len {}'.format(
                n, cfg.max_seq_len))

    if mask_plan is None:
        token_ids = np.array(doc.tokens, dtype=np.int64)
    else:
        token_ids = np.array(mask_plan.input_ids, dtype=np.int64)
    position_ids = np.array(doc.token_global_positions, dtype=np.int64)
    if mask_plan is not None:
        masked = list(mask_plan.masked_position_tokens)
        position_ids[masked] = cfg.masked_position_id

    if box_source == 'word':
        boxes = doc.token_boxes.copy()
    elif box_source == 'segment':
        boxes = segment_boxes(doc)
    else:
        raise RuntimeError('unknown box_source {!r}'.format(box_source))

    attention_mask = np.ones(n, dtype=bool)
    if pad_to is not None and pad_to > n:
        extra = pad_to - n
        token_ids = np.concatenate(
            [token_ids, np.full(extra, SPECIAL_IDS['pad'], dtype=np.int64)])
        position_ids = np.concatenate(
            [position_ids, np.zeros(extra, dtype=np.int64)])
        boxes = np.concatenate([boxes, np.zeros((extra, 4), dtype=np.int64)])
        attention_mask = np.concatenate(
            [attention_mask, np.zeros(extra, dtype=bool)])
    return ModelInputs(token_ids, position_ids, boxes, attention_mask)


def box_features(boxes):
    """``(N, 6)`` integer features x0, y0, x1, y1, width, height."""
    boxes = np.asarray(boxes, dtype=np.int64)
    return np.column_stack([boxes[:, 0], boxes[:, 1], boxes[:, 2],
                            boxes[:, 3], boxes[:, 2] - boxes[:, 0],
                            boxes[:, 3] - boxes[:, 1]])


def embed(inputs, params):
    """
    Summed token, 1D position and 2D box embeddings.

    :param inputs: :class:`ModelInputs`
    :param params: :class:`ModelParams`
    :return: ``(N, d)`` Tensor
    """
    result = T.add(
        T.embedding_lookup(params['embeddings.token'], inputs.token_ids),
        T.embedding_lookup(params['embeddings.pos1d'], inputs.position_ids))
    features = box_features(inputs.boxes)
    for column, feature in enumerate(BOX_FEATURES):
        table = params['embeddings.{}'.format(feature)]
        result = T.add(result, T.embedding_lookup(table, features[:, column]))
    return result


def _linear(x, params, w, b):
    return T.add(T.matmul(x, params[w]), params[b])


def attention(x, params, prefix, mask_bias, dropout_prob=0.0, rng=None):
    cfg = params.config
    q = _linear(x, params, prefix + '.attn.wq', prefix + '.attn.bq')
    k = _linear(x, params, prefix + '.attn.wk', prefix + '.attn.bk')
    v = _linear(x, params, prefix + '.attn.wv', prefix + '.attn.bv')
    scale = 1.0 / math.sqrt(cfg.head_dim)

    outputs = []
    for head in range(cfg.heads):
        cols = (slice(None), slice(head * cfg.head_dim,
                                   (head + 1) * cfg.head_dim))
        scores = T.mul(T.matmul(q[cols], T.transpose(k[cols])), scale)
        probs = T.softmax(T.add(scores, mask_bias), axis=-1)
        if rng is not None:
            probs = T.dropout(probs, dropout_prob, rng)
        outputs.append(T.matmul(probs, v[cols]))
    joined = outputs[0] if len(outputs) == 1 else T.concat(outputs, axis=1)
    return _linear(joined, params, prefix + '.attn.wo', prefix + '.attn.bo')


def feed_forward(x, params, prefix):
    hidden = T.gelu(_linear(x, params, prefix + '.ffn.w1', prefix + '.ffn.b1'))
    return _linear(hidden, params, prefix + '.ffn.w2', prefix + '.ffn.b2')


def encode(embeddings, params, attention_mask=None, rng=None):
    """
    Run the transformer stack.

    :param embeddings: ``(N, d)`` Tensor
    :param params: :class:`ModelParams`
    :param attention_mask: boolean ``(N,)``, False marks padding, which is
                           never attended to
    :param rng: generator for dropout; ``None`` disables dropout
    :return: ``(N, d)`` Tensor of token representations

    """
    cfg = params.config
    n = embeddings.shape[0]
    if attention_mask is None:
        attention_mask = np.ones(n, dtype=bool)
    mask_bias = T.Tensor(np.where(attention_mask, 0.0,
                                  ATTENTION_MASK_BIAS)[np.newaxis, :])
    p = cfg.dropout_prob

    x = embeddings
    for layer in range(cfg.layers):
        prefix = 'layer_{}'.format(layer)
        attended = attention(T.layer_norm(x), params, prefix, mask_bias,
                             p, rng)
        if rng is not None:
            attended = T.dropout(attended, p, rng)
        x = T.add(x, attended)
        transformed = feed_forward(T.layer_norm(x), params, prefix)
        if rng is not None:
            transformed = T.dropout(transformed, p, rng)
        x = T.add(x, transformed)
    if cfg.layers > 0:
        x = T.layer_norm(x)
    return x


@log_timing(logger)
def forward(params, inputs, rng=None):
    """Token representations for :class:`ModelInputs`."""
    return encode(embed(inputs, params), params, inputs.attention_mask, rng)


def encoder_checks(rng):
    """Gradient-check cases for one encoder block (d=8, N=4)."""
    cfg = EncoderConfig(vocab_size=12, hidden_dim=8, layers=1, heads=2,
                        ffn_dim=16, max_seq_len=8, max_local_pos=4,
                        grid_size=61, dropout_prob=0.0,
                        init_std=0.5)
    params = init_params(cfg, int(rng.integers(1 << 30)))
    x = T.Tensor(rng.normal(size=(4, 8)), requires_grad=True)
    weights = T.Tensor(rng.normal(size=(4, 8)))
    mask = np.array([True, True, True, False])

    def block(*_):
        return T.sum_(T.mul(encode(x, params, mask), weights))

    checked = [x] + [params[name] for name in
                     ('layer_0.attn.wq', 'layer_0.attn.wk',
                      'layer_0.attn.wv', 'layer_0.attn.bo',
                      'layer_0.ffn.w1', 'layer_0.ffn.b2')]
    cases = [GradCheckCase('encoder_block', block, checked)]

    # embedding sum feeding the block
    doc_ids = rng.integers(0, 12, size=4)
    inputs = ModelInputs(doc_ids, np.array([1, 2, 9, 3]),
                         np.array([[0, 0, 10, 10], [10, 0, 20, 10],
                                   [0, 20, 30, 30], [40, 40, 50, 60]]),
                         np.ones(4, dtype=bool))

    def full(*_):
        return T.sum_(T.mul(forward(params, inputs), weights))

    cases.append(GradCheckCase(
        'encoder_forward', full,
        [params['embeddings.token'], params['embeddings.x1']]))
    return cases
