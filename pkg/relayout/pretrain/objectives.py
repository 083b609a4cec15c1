#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

"""
Pre-training objectives.

Three tasks share one forward pass:

MLM
    whole words are replaced by ``[mask]`` and their original tokens are
    predicted.
1-LOP
    every global position of a selected segment is replaced by the masked
    position row; the model predicts each token's 1-based position inside
    its segment.
2-TSC
    pooled representations of segment pairs that are close on the page and
    already similar are pulled together through a predictor, with the
    target side held fixed by a stop-gradient.

The total loss is ``L_mlm + alpha * L_lop + gamma * L_tsc``; by default
the 2-TSC term only enters during the final epoch.
"""

import logging
from collections import namedtuple
import numpy as np
from relayout import options
from relayout.options import option
from relayout.document import doc_model
from relayout.document.tokenizer import (SPECIAL_IDS, N_BYTES, FIRST_MERGE_ID,
                                         TokenizerModel)
from relayout.model import encoder, heads
from relayout.tensor import tensor as T
from relayout.tensor.gradcheck import GradCheckCase
from relayout.util import log_timing

logger = logging.getLogger(__name__)


class PretrainConfig(options.Options):
    """Hyper-parameters of pre-training."""
    _fields_ = (
        ('p_mlm', 0.20),
        ('p_lop', 0.30),
        ('theta_dis', 120.0),
        ('theta_sim', 0.9),
        ('alpha', 0.5),
        ('gamma', 0.5),
        ('epochs', 5),
        ('tsc_final_epoch_only', True),
        ('tsc_symmetric', True),
        ('batch_size', 32),
        ('lr', 1e-3),
        ('weight_decay', 1e-2),
        ('mlm_mask_token_prob', 1.0),
        ('mlm_random_token_prob', 0.0),
        ('box_source', 'word'),
        ('rng_seed', 0),
    )

    p_mlm = option('p_mlm', options.is_probability, 'be in [0, 1]')
    p_lop = option('p_lop', options.is_probability, 'be in [0, 1]')
    theta_dis = option('theta_dis', options.is_non_negative,
                       'be a number >= 0')
    theta_sim = option('theta_sim',
                       lambda v: options.is_real(v) and -1.0 <= v <= 1.0,
                       'be in [-1, 1]')
    alpha = option('alpha', options.is_non_negative, 'be a number >= 0')
    gamma = option('gamma', options.is_non_negative, 'be a number >= 0')
    epochs = option('epochs', options.is_non_negative_int,
                    'be an integer >= 0')
    tsc_final_epoch_only = option('tsc_final_epoch_only', options.is_bool,
                                  'be true or false')
    tsc_symmetric = option('tsc_symmetric', options.is_bool,
                           'be true or false')
    batch_size = option('batch_size', options.is_positive_int,
                        'be an integer > 0')
    lr = option('lr', options.is_non_negative, 'be a number >= 0')
    weight_decay = option('weight_decay', options.is_non_negative,
                          'be a number >= 0')
    mlm_mask_token_prob = option('mlm_mask_token_prob',
                                 options.is_probability, 'be in [0, 1]')
    mlm_random_token_prob = option('mlm_random_token_prob',
                                   options.is_probability, 'be in [0, 1]')
    box_source = option('box_source', options.one_of('word', 'segment'),
                        'be one of word, segment')
    rng_seed = option('rng_seed', options.is_non_negative_int,
                      'be an integer >= 0')

    def sanity_check(self):
        if self.mlm_mask_token_prob + self.mlm_random_token_prob > 1.0:
            raise ValueError(
                'mlm_mask_token_prob + mlm_random_token_prob must be <= 1')

    def tsc_active(self, epoch):
        """Whether the 2-TSC term is part of the loss in ``epoch``."""
        if self.gamma <= 0:
            return False
        return not self.tsc_final_epoch_only or epoch == self.epochs - 1


class LossValue(namedtuple('LossValue', 'value count')):
    """
    A loss with the number of targets it averages over.

    A count of zero marks an absent loss ("no targets" / "no pairs"); its
    value is a constant zero.
    """
    __slots__ = ()

    @property
    def absent(self):
        return self.count == 0

    @classmethod
    def empty(cls):
        return cls(T.Tensor(0.0), 0)


class MaskPlan(object):
    """
    Masking decisions for one document.

    :param mlm_masked_words: source word indices masked for MLM
    :param lop_masked_segments: segment indices whose positions are hidden
    :param mlm_targets: ``(token index, original token id)`` pairs
    :param lop_targets: ``(token index, local position)`` pairs
    :param lop_target_segments: segment of each LOP target
    :param input_ids: token ids after MLM replacement

    """
    def __init__(self, mlm_masked_words, lop_masked_segments, mlm_targets,
                 lop_targets, lop_target_segments, input_ids):
        self.mlm_masked_words = list(mlm_masked_words)
        self.lop_masked_segments = list(lop_masked_segments)
        self.mlm_targets = list(mlm_targets)
        self.lop_targets = list(lop_targets)
        self.lop_target_segments = list(lop_target_segments)
        self.input_ids = list(input_ids)

    @property
    def J(self):
        return len(self.mlm_targets)

    @property
    def M(self):
        return len(self.lop_targets)

    @property
    def masked_position_tokens(self):
        return [n for n, _ in self.lop_targets]

    @property
    def is_empty(self):
        return not self.mlm_targets and not self.lop_targets


class PairSet(object):
    """Ordered segment-index pairs ``(k, k')`` that passed both gates."""
    def __init__(self, pairs=()):
        self.pairs = sorted(set((int(a), int(b)) for a, b in pairs))
        assert all(a != b for a, b in self.pairs)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __contains__(self, pair):
        return tuple(pair) in set(self.pairs)

    def __eq__(self, other):
        return isinstance(other, PairSet) and self.pairs == other.pairs

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return 'PairSet({})'.format(self.pairs)

    def one_direction(self):
        return [(a, b) for a, b in self.pairs if a < b]


def _random_token_ids(rng, size, vocab_size):
    # byte and merge ids only, never a special token
    n_regular = vocab_size - (FIRST_MERGE_ID - N_BYTES)
    draws = rng.integers(n_regular, size=size)
    return np.where(draws < N_BYTES, draws,
                    draws + (FIRST_MERGE_ID - N_BYTES))


def sample_masks(doc, cfg, rng, vocab_size=None, apply_lop=True):
    """
    Draw the MLM and 1-LOP masks of one document.

    :param doc: :class:`TokenizedDocument`
    :param cfg: :class:`PretrainConfig`
    :param rng: ``numpy.random.Generator``
    :param vocab_size: needed only when random-token replacement is on
    :param apply_lop: when False the segment draws are still consumed but
                      no position is masked
    :return: :class:`MaskPlan`

    Each word is masked with probability ``p_mlm``, all of its tokens
    together. Each segment is selected with probability ``p_lop``, all of
    its positions together.
    """
    if not isinstance(doc, doc_model.TokenizedDocument):
        raise TypeError(
            'sample_masks accepts a TokenizedDocument, got {}'.format(
                type(doc).__name__))
    words = doc.word_indices
    word_draws = rng.random(len(words)) < cfg.p_mlm
    segment_draws = rng.random(len(doc.token_segments)) < cfg.p_lop

    tokens_of_word = doc.tokens_of_word
    input_ids = list(doc.tokens)
    masked_words = [w for w, hit in zip(words, word_draws) if hit]
    mlm_targets = []
    split = cfg.mlm_mask_token_prob < 1.0
    for w in masked_words:
        members = tokens_of_word[w]
        for n in members:
            mlm_targets.append((n, doc.tokens[n]))
        if not split:
            replacement = [SPECIAL_IDS['mask']] * len(members)
        else:
            u = rng.random()
            if u < cfg.mlm_mask_token_prob:
                replacement = [SPECIAL_IDS['mask']] * len(members)
            elif u < cfg.mlm_mask_token_prob + cfg.mlm_random_token_prob:
                if vocab_size is None:
                    raise RuntimeError(
                        'random-token replacement needs vocab_size')
                replacement = list(_random_token_ids(rng, len(members),
                                                     vocab_size))
            else:
                replacement = [doc.tokens[n] for n in members]
        for n, token_id in zip(members, replacement):
            input_ids[n] = int(token_id)

    masked_segments = []
    lop_targets = []
    lop_segments = []
    if apply_lop:
        for k, hit in enumerate(segment_draws):
            if not hit:
                continue
            segment = sorted(doc.token_segments[k])
            masked_segments.append(k)
            for n, local in zip(segment, doc_model.local_positions(segment)):
                lop_targets.append((n, local))
                lop_segments.append(k)

    return MaskPlan(masked_words, masked_segments, mlm_targets, lop_targets,
                    lop_segments, input_ids)


def mlm_loss(logits, target_ids):
    """
    Mean negative log-likelihood of the original tokens.

    :param logits: ``(J, V)`` Tensor from the MLM head at masked tokens
    :param target_ids: ``J`` original token ids
    :return: :class:`LossValue`
    """
    target_ids = list(target_ids)
    if not target_ids:
        return LossValue.empty()
    return LossValue(T.cross_entropy(logits, target_ids), len(target_ids))


def lop_loss(logits, local_positions, segments=None):
    """
    Mean negative log-likelihood of the local positions.

    :param logits: ``(M, max_local_pos)`` Tensor; class ``c`` is position
                   ``c + 1``
    :param local_positions: ``M`` 1-based positions
    :param segments: optional segment index of each target, for errors
    :return: :class:`LossValue`
    """
    local_positions = list(local_positions)
    if not local_positions:
        return LossValue.empty()
    n_classes = logits.shape[-1]
    for i, pos in enumerate(local_positions):
        if pos < 1 or pos > n_classes:
            segment = segments[i] if segments is not None else '?'
            raise RuntimeError(
                'local position {} in segment {} exceeds max_local_pos '
                '{}'.format(pos, segment, n_classes))
    classes = [pos - 1 for pos in local_positions]
    return LossValue(T.cross_entropy(logits, classes), len(classes))


def segment_representation(reps, segment):
    """Average of the segment's token representations, a ``(d,)`` Tensor."""
    segment = list(segment)
    if not segment:
        raise RuntimeError('segment_representation: segment is empty')
    return T.mean_pool(reps, segment)


def pooled_vectors(reps, segments):
    """Numpy segment averages used for pair gating."""
    data = reps.data if isinstance(reps, T.Tensor) else np.asarray(reps)
    return [data[list(s)].mean(axis=0) for s in segments]


@log_timing(logger)
def select_pairs(segments, boxes, pooled, theta_dis, theta_sim):
    """
    Segment pairs close on the page and similar in representation.

    :param segments: token-index lists
    :param boxes: token boxes on the grid
    :param pooled: pooled vector of each segment
    :param theta_dis: pairs must have center distance ``< theta_dis``
    :param theta_sim: pairs must have cosine similarity ``> theta_sim``
    :return: :class:`PairSet` holding both orders of each passing pair

    """
    pairs = []
    n = len(segments)
    for a in range(n):
        for b in range(a + 1, n):
            dist = doc_model.segment_center_distance(segments[a],
                                                     segments[b], boxes)
            if not dist < theta_dis:
                continue
            sim = T.cosine_similarity(pooled[a], pooled[b])
            if sim > theta_sim:
                pairs.append((a, b))
                pairs.append((b, a))
    return PairSet(pairs)


def tsc_loss(reps, segments, pairs, predictor, symmetric=True,
             target_reps=None):
    """
    Stop-gradient segment clustering loss.

    :param reps: ``(N, d)`` token representations
    :param segments: token-index lists
    :param pairs: :class:`PairSet`
    :param predictor: callable mapping ``(N, d)`` to ``(N, d)``, applied
                      per token before pooling
    :param symmetric: use both orders of every pair; otherwise only
                      ``k < k'``
    :param target_reps: representations pooled on the stop-gradient side;
                        defaults to ``reps``
    :return: :class:`LossValue`, the mean of ``-cos(z_k, stopgrad(v_k'))``

    """
    used = list(pairs) if symmetric else pairs.one_direction()
    if not used:
        return LossValue.empty()
    predicted = predictor(reps)
    target_reps = reps if target_reps is None else target_reps
    z = {}
    v = {}
    terms = []
    for a, b in used:
        if a not in z:
            z[a] = segment_representation(predicted, segments[a])
        if b not in v:
            v[b] = T.detach(segment_representation(target_reps, segments[b]))
        terms.append(T.neg(T.cosine_sim(z[a], v[b])))
    return LossValue(T.mean(T.stack(terms)), len(terms))


def combine_losses(losses):
    """
    Target-weighted mean of several :class:`LossValue`.

    Absent losses are skipped; the result is absent when all of them are.
    """
    total = None
    count = 0
    for loss in losses:
        if loss.absent:
            continue
        term = T.mul(loss.value, float(loss.count))
        total = term if total is None else T.add(total, term)
        count += loss.count
    if total is None:
        return LossValue.empty()
    return LossValue(T.div(total, float(count)), count)


def _as_loss(value):
    if value is None:
        return None
    if isinstance(value, LossValue):
        return None if value.absent else value.value
    return T.as_tensor(value)


def total_loss(l_mlm, l_lop, l_tsc, cfg, epoch):
    """
    ``L_mlm + alpha * L_lop + gamma * L_tsc``.

    Components may be :class:`LossValue`, Tensors, numbers or ``None``;
    absent components are left out. The 2-TSC term only counts in epochs
    where :meth:`PretrainConfig.tsc_active` holds.
    """
    total = None
    terms = [(_as_loss(l_mlm), 1.0), (_as_loss(l_lop), cfg.alpha)]
    if cfg.tsc_active(epoch):
        terms.append((_as_loss(l_tsc), cfg.gamma))
    for value, weight in terms:
        if value is None or weight == 0:
            continue
        term = value if weight == 1.0 else T.mul(value, weight)
        total = term if total is None else T.add(total, term)
    return T.Tensor(0.0) if total is None else total


def loss_checks(rng):
    """Gradient-check cases for the three losses on a d=8 micro-instance."""
    cfg = encoder.EncoderConfig(vocab_size=300, hidden_dim=8, layers=1,
                                heads=2, ffn_dim=16, max_seq_len=16,
                                max_local_pos=8, dropout_prob=0.0,
                                init_std=0.5)
    seed = int(rng.integers(1 << 30))
    params = heads.add_pretrain_heads(encoder.init_params(cfg, seed), seed)

    raw = doc_model.RawDocument(
        ['ab', 'cd', 'ef'], [0, 1, 2],
        [(0, 0, 20, 18), (30, 0, 50, 18), (0, 20, 20, 38)],
        [[0, 1], [2]], (100, 100))
    doc = doc_model.tokenize(raw, TokenizerModel([]))
    plan = MaskPlan([1], [1], [(2, doc.tokens[2]), (3, doc.tokens[3])],
                    [(4, 1), (5, 2)], [1, 1],
                    doc.tokens[:2] + [SPECIAL_IDS['mask']] * 2 +
                    doc.tokens[4:])
    inputs = encoder.build_inputs(doc, cfg, plan)

    def reps():
        return encoder.forward(params, inputs)

    mlm_rows = np.array([n for n, _ in plan.mlm_targets])
    lop_rows = np.array([n for n, _ in plan.lop_targets])

    def mlm(*_):
        logits = heads.mlm_logits(params, reps()[mlm_rows])
        return mlm_loss(logits, [t for _, t in plan.mlm_targets]).value

    def lop(*_):
        logits = heads.lop_logits(params, reps()[lop_rows])
        return lop_loss(logits, [p for _, p in plan.lop_targets]).value

    # gating is not differentiable, so pairs are selected once at the
    # starting point; the stop-gradient side is frozen there too, where
    # finite differences cannot see through it
    pretrain_cfg = PretrainConfig(theta_dis=300.0, theta_sim=-1.0,
                                  alpha=0.5, gamma=0.5, epochs=1)
    start = reps()
    segments = doc.token_segments
    pairs = select_pairs(segments, doc.token_boxes,
                         pooled_vectors(start, segments),
                         pretrain_cfg.theta_dis, pretrain_cfg.theta_sim)
    if not len(pairs):
        raise RuntimeError('loss_checks: no segment pair passed the gates')
    frozen = T.Tensor(start.data)

    def tsc(*_):
        return tsc_loss(reps(), segments, pairs,
                        lambda r: heads.predictor(params, r),
                        target_reps=frozen).value

    def total(*_):
        current = reps()
        l_mlm = mlm_loss(heads.mlm_logits(params, current[mlm_rows]),
                         [t for _, t in plan.mlm_targets])
        l_lop = lop_loss(heads.lop_logits(params, current[lop_rows]),
                         [p for _, p in plan.lop_targets])
        l_tsc = tsc_loss(current, segments, pairs,
                         lambda r: heads.predictor(params, r),
                         target_reps=frozen)
        return total_loss(l_mlm, l_lop, l_tsc, pretrain_cfg, epoch=0)

    return [
        GradCheckCase('mlm_loss', mlm,
                      [params['layer_0.ffn.w2'], params['mlm.dense.w']]),
        GradCheckCase('lop_loss', lop,
                      [params['layer_0.attn.wv'], params['lop.out.w']]),
        GradCheckCase('tsc_loss', tsc,
                      [params['layer_0.ffn.w1'],
                       params['predictor.hidden.w']]),
        GradCheckCase('total_loss', total,
                      [params['layer_0.attn.wq'], params['mlm.dense.w'],
                       params['lop.out.w'], params['predictor.hidden.w']]),
    ]
