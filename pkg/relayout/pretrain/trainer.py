#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

"""
The pre-training loop.

Documents are visited in a seeded shuffled order, ``batch_size`` at a
time. Every document gets its own forward pass; the batch loss of each
objective is the target-weighted mean over the batch's documents, so a
batch behaves like one long document made of its members. Pairs for
2-TSC are only formed inside a single document.
"""

import logging
from collections import namedtuple
import numpy as np
from relayout.document import doc_model
from relayout.model import encoder, heads
from relayout.pretrain import objectives as obj
from relayout.tensor import tensor as T
from relayout.tensor.optimizer import AdamW, grad_norm
from relayout.util import (make_rng, STREAM_SHUFFLE, STREAM_MASK,
                           STREAM_DROPOUT)

logger = logging.getLogger(__name__)

REPORT_FIELDS = ('epoch', 'mlm', 'lop', 'tsc', 'total', 'mlm_acc', 'lop_acc')


class LossReport(namedtuple('LossReport', REPORT_FIELDS)):
    """
    Averages over one epoch.

    Loss fields are means over the batches where the loss was present;
    accuracies are correct predictions over targets for the whole epoch.
    Absent quantities are ``None`` (``null`` in JSON).
    """
    __slots__ = ()

    def to_dict(self):
        return dict(zip(REPORT_FIELDS, self))


class _Accumulator(object):
    # sums for one epoch
    def __init__(self):
        self.losses = {'mlm': [], 'lop': [], 'tsc': [], 'total': []}
        self.correct = {'mlm': 0, 'lop': 0}
        self.targets = {'mlm': 0, 'lop': 0}

    def add_loss(self, name, value):
        self.losses[name].append(float(value))

    def add_hits(self, name, correct, targets):
        self.correct[name] += int(correct)
        self.targets[name] += int(targets)

    def report(self, epoch):
        def mean(name):
            values = self.losses[name]
            return float(np.mean(values)) if values else None

        def accuracy(name):
            if not self.targets[name]:
                return None
            return self.correct[name] / float(self.targets[name])

        return LossReport(epoch, mean('mlm'), mean('lop'), mean('tsc'),
                          mean('total'), accuracy('mlm'), accuracy('lop'))


def _hits(logits, targets):
    return int(np.sum(np.argmax(logits.data, axis=1) == np.asarray(targets)))


class Pretrainer(object):
    """
    Run pre-training of an encoder with its MLM, 1-LOP and 2-TSC heads.

    :param encoder_config: :class:`EncoderConfig`
    :param config: :class:`PretrainConfig`

    """
    def __init__(self, encoder_config, config):
        config.sanity_check()
        encoder_config.sanity_check()
        self.encoder_config = encoder_config
        self.config = config

    def init_params(self):
        """Fresh encoder and pre-training heads from ``rng_seed``."""
        seed = self.config.rng_seed
        return heads.add_pretrain_heads(
            encoder.init_params(self.encoder_config, seed), seed)

    def batches(self, n_docs, epoch):
        """Shuffled document indices of ``epoch`` split into batches."""
        order = make_rng(self.config.rng_seed, STREAM_SHUFFLE,
                         epoch).permutation(n_docs)
        size = self.config.batch_size
        return [list(order[i:i + size]) for i in range(0, n_docs, size)]

    def run(self, documents, params=None, store=None):
        """
        Pre-train on ``documents``.

        :param documents: list of :class:`TokenizedDocument`
        :param params: starting :class:`ModelParams`; fresh when ``None``
        :param store: optional :class:`relayout.vault.RunStore` receiving
                      one checkpoint per epoch boundary and the loss report
        :return: ``(params, reports)``

        """
        documents = list(documents)
        if not documents:
            raise RuntimeError('pretrain: the corpus is empty')
        self._check_documents(documents)
        cfg = self.config
        if params is None:
            params = self.init_params()
        for head in heads.PRETRAIN_HEADS:
            if not params.has_head(head):
                raise RuntimeError(
                    'pretrain: parameters have no {} head'.format(head))

        n_batches = len(self.batches(len(documents), 0))
        total_steps = cfg.epochs * n_batches
        optimizer = AdamW(params.select(), total_steps=total_steps or None,
                          lr=cfg.lr, weight_decay=cfg.weight_decay)
        fingerprint = documents[0].tokenizer_fingerprint

        if store is not None:
            store.save_checkpoint(params, epoch=0,
                                  metadata=self._metadata(0, fingerprint))

        reports = []
        for epoch in range(cfg.epochs):
            logger.info('Running epoch %d of %d.', epoch + 1, cfg.epochs)
            acc = _Accumulator()
            for index, batch in enumerate(self.batches(len(documents),
                                                       epoch)):
                self._step(params, optimizer, [documents[i] for i in batch],
                           epoch, index, acc)
            params.check_finite()
            report = acc.report(epoch)
            reports.append(report)
            logger.info('Epoch %d: total %s, mlm %s, lop %s, tsc %s.',
                        epoch, report.total, report.mlm, report.lop,
                        report.tsc)
            if store is not None:
                store.append_report('loss_report.jsonl', report.to_dict())
                store.save_checkpoint(
                    params, epoch=epoch + 1,
                    metadata=self._metadata(epoch + 1, fingerprint))
        logger.info('Finished %d epochs of pre-training.', cfg.epochs)
        return params, reports

    def forward_losses(self, params, doc, epoch, mask_rng, dropout_rng=None):
        """
        The three per-document losses.

        :return: ``(mlm, lop, tsc, hits)`` with :class:`LossValue` losses
                 and a dict of ``(correct, targets)`` per prediction task

        """
        cfg = self.config
        plan = obj.sample_masks(doc, cfg, mask_rng,
                                vocab_size=self.encoder_config.vocab_size,
                                apply_lop=cfg.alpha > 0)
        inputs = encoder.build_inputs(doc, self.encoder_config, plan,
                                      box_source=cfg.box_source)
        reps = encoder.forward(params, inputs, rng=dropout_rng)
        hits = {}

        mlm = obj.LossValue.empty()
        if plan.J:
            rows = np.array([n for n, _ in plan.mlm_targets])
            targets = [t for _, t in plan.mlm_targets]
            logits = heads.mlm_logits(params, reps[rows])
            mlm = obj.mlm_loss(logits, targets)
            hits['mlm'] = (_hits(logits, targets), len(targets))

        lop = obj.LossValue.empty()
        if plan.M:
            rows = np.array([n for n, _ in plan.lop_targets])
            positions = [p for _, p in plan.lop_targets]
            logits = heads.lop_logits(params, reps[rows])
            lop = obj.lop_loss(logits, positions, plan.lop_target_segments)
            hits['lop'] = (_hits(logits, [p - 1 for p in positions]),
                           len(positions))

        tsc = obj.LossValue.empty()
        if cfg.tsc_active(epoch):
            segments = doc.token_segments
            pooled = obj.pooled_vectors(reps, segments)
            pairs = obj.select_pairs(segments, doc.token_boxes, pooled,
                                     cfg.theta_dis, cfg.theta_sim)
            tsc = obj.tsc_loss(reps, segments, pairs,
                               lambda r: heads.predictor(params, r),
                               symmetric=cfg.tsc_symmetric)
        return mlm, lop, tsc, hits

    #
    # private helper methods
    #

    def _step(self, params, optimizer, docs, epoch, index, acc):
        cfg = self.config
        mask_rng = make_rng(cfg.rng_seed, STREAM_MASK, epoch, index)
        dropout_rng = None
        if self.encoder_config.dropout_prob > 0:
            dropout_rng = make_rng(cfg.rng_seed, STREAM_DROPOUT, epoch, index)

        parts = {'mlm': [], 'lop': [], 'tsc': []}
        for doc in docs:
            mlm, lop, tsc, hits = self.forward_losses(params, doc, epoch,
                                                      mask_rng, dropout_rng)
            parts['mlm'].append(mlm)
            parts['lop'].append(lop)
            parts['tsc'].append(tsc)
            for name, (correct, targets) in hits.items():
                acc.add_hits(name, correct, targets)

        losses = dict((name, obj.combine_losses(part))
                      for name, part in parts.items())
        for name, loss in losses.items():
            if not loss.absent:
                acc.add_loss(name, loss.value.item())
        total = obj.total_loss(losses['mlm'], losses['lop'], losses['tsc'],
                               cfg, epoch)
        if not total.requires_grad:
            logger.debug('Batch %d of epoch %d has no targets.', index, epoch)
            return
        acc.add_loss('total', total.item())
        optimizer.zero_grad()
        T.backward(total)
        lr = optimizer.step()
        logger.debug('epoch %d batch %d: loss %.6f, lr %.3g, grad norm %.4g',
                     epoch, index, total.item(), lr,
                     grad_norm(optimizer.params))

    def _check_documents(self, documents):
        fingerprints = set()
        for doc in documents:
            if not isinstance(doc, doc_model.TokenizedDocument):
                raise TypeError(
                    'pretrain accepts TokenizedDocuments, got {}'.format(
                        type(doc).__name__))
            fingerprints.add(doc.tokenizer_fingerprint)
            if max(doc.tokens) >= self.encoder_config.vocab_size:
                raise RuntimeError(
                    'token id {} does not fit vocab_size {}'.format(
                        max(doc.tokens), self.encoder_config.vocab_size))
        if len(fingerprints) > 1:
            raise RuntimeError(
                'pretrain: documents come from {} different '
                'tokenizers'.format(len(fingerprints)))

    def _metadata(self, epoch, fingerprint):
        return {'epoch': epoch,
                'tokenizer_fingerprint': fingerprint,
                'pretrain': self.config.to_dict()}


def pretrain(documents, encoder_config, config, params=None, store=None):
    """
    Pre-train an encoder.

    :param documents: list of :class:`TokenizedDocument`
    :param encoder_config: :class:`EncoderConfig`
    :param config: :class:`PretrainConfig`
    :param params: optional starting parameters
    :param store: optional run store for checkpoints and the loss report
    :return: ``(params, reports)``; with ``epochs=0`` the parameters are
             the initialization and the report list is empty

    """
    return Pretrainer(encoder_config, config).run(documents, params, store)
