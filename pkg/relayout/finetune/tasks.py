#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

"""
Downstream fine-tuning tasks.

Two tasks are registered:

``sec``
    semantic entity classification, BIO tagging of words through a linear
    head on each word's first token
``qa``
    extractive question answering, with the input laid out as
    ``[cls] question [sep] context`` and start/end scorers over the
    context words

Ground truth only ever provides targets and evaluation references; model
inputs are built from the OCR-level document alone.
"""

import logging
import multiprocessing
from collections import namedtuple
import numpy as np
from six import with_metaclass
from relayout import options
from relayout.options import option
from relayout.document import doc_model
from relayout.document.tokenizer import SPECIAL_IDS
from relayout.finetune import metrics
from relayout.finetune.bio import bio_encode, OUTSIDE_TAG
from relayout.model import encoder, heads
from relayout.model.encoder import ModelInputs
from relayout.pretrain.objectives import LossValue, combine_losses
from relayout.tensor import tensor as T
from relayout.tensor.optimizer import AdamW
from relayout.util import (make_rng, log_timing, STREAM_SPLIT,
                           STREAM_SHUFFLE, STREAM_DROPOUT)

logger = logging.getLogger(__name__)

DEFAULT_SPAN_CAP = 30


class FinetuneConfig(options.Options):
    """Settings of one fine-tuning run."""
    _fields_ = (
        ('task', 'sec'),
        ('lr', 1e-3),
        ('steps', 200),
        ('batch_size', 8),
        ('weight_decay', 1e-2),
        ('span_cap', DEFAULT_SPAN_CAP),
        ('train_fraction', 0.75),
        ('span_level_f1', False),
        ('box_source', 'word'),
        ('rng_seed', 0),
    )

    task = option('task', options.one_of('sec', 'qa'), 'be one of sec, qa')
    lr = option('lr', options.is_non_negative, 'be a number >= 0')
    steps = option('steps', options.is_non_negative_int, 'be an integer >= 0')
    batch_size = option('batch_size', options.is_positive_int,
                        'be an integer > 0')
    weight_decay = option('weight_decay', options.is_non_negative,
                          'be a number >= 0')
    span_cap = option('span_cap', options.is_non_negative_int,
                      'be an integer >= 0')
    train_fraction = option('train_fraction', options.is_probability,
                            'be in [0, 1]')
    span_level_f1 = option('span_level_f1', options.is_bool,
                           'be true or false')
    box_source = option('box_source', options.one_of('word', 'segment'),
                        'be one of word, segment')
    rng_seed = option('rng_seed', options.is_non_negative_int,
                      'be an integer >= 0')


SecExample = namedtuple('SecExample', 'name doc tags')


class QaExample(namedtuple('QaExample',
                           'name question question_ids context answer golds')):
    """
    One extractive question.

    ``answer`` is the ``(first_word, last_word)`` source-word range and
    ``golds`` the accepted answer strings.
    """
    __slots__ = ()

    @property
    def context_words(self):
        return self.context.word_indices

    @property
    def answer_indices(self):
        """``answer`` as indices into :attr:`context_words`."""
        words = self.context_words
        return words.index(self.answer[0]), words.index(self.answer[1])


def split_indices(n, fraction, seed):
    """Deterministic ``(train, test)`` split of ``range(n)``."""
    order = make_rng(seed, STREAM_SPLIT).permutation(n)
    n_train = int(round(n * fraction))
    return sorted(int(i) for i in order[:n_train]), \
        sorted(int(i) for i in order[n_train:])


def check_compatible(params, doc, fingerprint=None):
    """
    Raise when ``doc`` was tokenized differently from the checkpoint.

    :param fingerprint: tokenizer fingerprint stored with the checkpoint
    """
    if fingerprint is not None and doc.tokenizer_fingerprint is not None and \
            fingerprint != doc.tokenizer_fingerprint:
        raise RuntimeError(
            'tokenizer mismatch: checkpoint {} but document {}'.format(
                fingerprint[:12], doc.tokenizer_fingerprint[:12]))
    if doc.tokens and max(doc.tokens) >= params.config.vocab_size:
        raise RuntimeError(
            'token id {} does not fit vocab_size {}'.format(
                max(doc.tokens), params.config.vocab_size))


def word_rows(doc, offset=0):
    """Row of each word's first token, words in reading order."""
    first = doc.first_token_of_word
    return np.array([offset + first[w] for w in doc.word_indices],
                    dtype=np.int64)


def classify_tokens(params, doc, label_set, box_source='word',
                    fingerprint=None):
    """
    Predicted BIO tag of every word.

    :param params: :class:`ModelParams` with a ``sec`` head
    :param doc: :class:`TokenizedDocument`
    :param label_set: :class:`BioLabelSet`
    :return: tags of ``doc.word_indices``, in reading order

    Each word takes the argmax over its first token's logits; ties go to
    the lowest tag index.
    """
    check_compatible(params, doc, fingerprint)
    inputs = encoder.build_inputs(doc, params.config, box_source=box_source)
    reps = encoder.forward(params, inputs)
    logits = heads.sec_logits(params, reps[word_rows(doc)])
    return [label_set.tag(int(i)) for i in np.argmax(logits.data, axis=1)]


def build_qa_inputs(example, cfg, box_source='word'):
    """
    ``[cls] question [sep] context`` inputs.

    :return: ``(ModelInputs, offset)`` where ``offset`` is the row of the
             first context token

    Question tokens carry the zero box; positions run over the whole
    sequence.
    """
    doc = example.context
    if not isinstance(doc, doc_model.TokenizedDocument):
        raise TypeError(
            'the QA context must be a TokenizedDocument, got {}'.format(
                type(doc).__name__))
    offset = len(example.question_ids) + 2
    n = offset + doc.num_tokens
    if n > cfg.max_seq_len:
        raise RuntimeError(
            'question and context need {} tokens, more than max_seq_len '
            '{}'.format(n, cfg.max_seq_len))
    token_ids = np.array([SPECIAL_IDS['cls']] + list(example.question_ids) +
                         [SPECIAL_IDS['sep']] + doc.tokens, dtype=np.int64)
    position_ids = np.arange(1, n + 1, dtype=np.int64)
    if box_source == 'segment':
        context_boxes = doc_model.segment_boxes(doc)
    else:
        context_boxes = doc.token_boxes
    boxes = np.concatenate([np.zeros((offset, 4), dtype=np.int64),
                            np.asarray(context_boxes, dtype=np.int64)])
    return (ModelInputs(token_ids, position_ids, boxes,
                        np.ones(n, dtype=bool)), offset)


def best_span(start_scores, end_scores, span_cap=DEFAULT_SPAN_CAP):
    """
    Highest ``start_scores[s] + end_scores[e]`` with ``s <= e <= s + cap``.

    Ties go to the smallest ``(s, e)``.
    """
    start_scores = np.asarray(start_scores, dtype=float)
    end_scores = np.asarray(end_scores, dtype=float)
    n = len(start_scores)
    if n == 0 or len(end_scores) != n:
        raise RuntimeError('no valid answer span among {} words'.format(n))
    s, e = np.meshgrid(np.arange(n), np.arange(n), indexing='ij')
    valid = (s <= e) & (e - s <= span_cap)
    total = np.where(valid, start_scores[:, None] + end_scores[None, :],
                     -np.inf)
    flat = int(np.argmax(total))
    return flat // n, flat % n


def qa_scores(params, example, box_source='word', rng=None):
    """Start and end score Tensors over the context words."""
    inputs, offset = build_qa_inputs(example, params.config, box_source)
    reps = encoder.forward(params, inputs, rng=rng)
    rows = word_rows(example.context, offset)
    start, end = heads.qa_scores(params, reps[rows])
    return start, end


def qa_predict(params, example, span_cap=DEFAULT_SPAN_CAP, box_source='word',
               fingerprint=None):
    """
    Predicted answer of one question.

    :return: ``(first_word, last_word)`` source word indices
    """
    check_compatible(params, example.context, fingerprint)
    start, end = qa_scores(params, example, box_source)
    s, e = best_span(start.data, end.data, span_cap)
    words = example.context_words
    return words[s], words[e]


def answer_text(doc, span):
    """Words of ``span`` joined in reading order."""
    words = doc.word_indices
    s, e = words.index(span[0]), words.index(span[1])
    return ' '.join(doc.words[w] for w in words[s:e + 1])


class _TaskRegistry(type):
    """
    Metaclass that maintains a registry of fine-tuning tasks.

    Every subclass of Task must set ``_task_key_``.
    """
    _task_registry = {}

    def __init__(cls, name, bases, attrs):
        if name == 'Task':
            pass    # we don't register the base class
        else:
            try:
                key = attrs['_task_key_']
            except KeyError:
                raise RuntimeError(
                    'Task type {} subclasses Task, '
                    'but does not set _task_key_'.format(name))
            if key in _TaskRegistry._task_registry:
                raise RuntimeError(
                    'Trying to register two different classes '
                    'with _task_key_ = {}.'.format(key))
            _TaskRegistry._task_registry[key] = cls

    @classmethod
    def get_constructor_for_key(self, key):
        """Get the constructor for the task type matching key."""
        try:
            return _TaskRegistry._task_registry[key]
        except KeyError:
            raise RuntimeError('Unknown task type "{}".'.format(key))


class Task(with_metaclass(_TaskRegistry, object)):
    """
    Abstract fine-tuning task.

    :param config: :class:`FinetuneConfig`
    :param encoder_config: :class:`EncoderConfig`
    :param label_set: :class:`BioLabelSet`, used by tagging tasks

    """
    def __init__(self, config, encoder_config, label_set=None):
        self.config = config
        self.encoder_config = encoder_config
        self.label_set = label_set

    def build_examples(self, pairs, tokenizer):
        """
        Examples from ``(name, RawDocument, GroundTruth)`` triples.
        """
        raise NotImplementedError()

    def add_head(self, params):
        raise NotImplementedError()

    def example_loss(self, params, example, rng=None):
        """:class:`LossValue` of one example."""
        raise NotImplementedError()

    def predict(self, params, example, fingerprint=None):
        raise NotImplementedError()

    def score(self, examples, predictions):
        """Metric report of predictions against the examples."""
        raise NotImplementedError()

    def prediction_record(self, example, prediction):
        raise NotImplementedError()


class SecTask(Task):
    """BIO tagging of entity classes."""
    _task_key_ = 'sec'

    def __init__(self, config, encoder_config, label_set=None):
        if label_set is None:
            raise RuntimeError('the sec task needs a label set')
        super(SecTask, self).__init__(config, encoder_config, label_set)

    def build_examples(self, pairs, tokenizer):
        examples = []
        for name, raw, truth in pairs:
            doc = doc_model.tokenize(raw, tokenizer,
                                     self.encoder_config.max_seq_len)
            present = doc.word_indices
            kept = set(present)
            order = present + [w for w in raw.reading_order if w not in kept]
            tags = bio_encode(truth.entity_labels, truth.semantic_groups,
                              self.label_set, order)
            examples.append(SecExample(name, doc, [tags[w] for w in present]))
        return examples

    def add_head(self, params):
        heads.add_head(params, 'sec', self.config.rng_seed,
                       n_out=len(self.label_set))

    def example_loss(self, params, example, rng=None):
        doc = example.doc
        inputs = encoder.build_inputs(doc, self.encoder_config,
                                      box_source=self.config.box_source)
        reps = encoder.forward(params, inputs, rng=rng)
        logits = heads.sec_logits(params, reps[word_rows(doc)])
        targets = [self.label_set.index(t) for t in example.tags]
        return LossValue(T.cross_entropy(logits, targets), len(targets))

    def predict(self, params, example, fingerprint=None):
        return classify_tokens(params, example.doc, self.label_set,
                               self.config.box_source, fingerprint)

    def score(self, examples, predictions):
        pred = []
        gold = []
        for example, tags in zip(examples, predictions):
            # the separator keeps spans from running across documents
            pred.extend(list(tags) + [OUTSIDE_TAG])
            gold.extend(list(example.tags) + [OUTSIDE_TAG])
        if self.config.span_level_f1:
            result = metrics.span_f1(pred, gold)
        else:
            result = metrics.word_f1(pred, gold)
        return {'task': 'sec', 'precision': result.precision,
                'recall': result.recall, 'f1': result.f1}

    def prediction_record(self, example, prediction):
        words = example.doc.word_indices
        return {'doc': example.name,
                'words': [example.doc.words[w] for w in words],
                'pred': list(prediction), 'gold': list(example.tags)}


class QaTask(Task):
    """Extractive question answering."""
    _task_key_ = 'qa'

    def build_examples(self, pairs, tokenizer):
        examples = []
        for name, raw, truth in pairs:
            for question, answer in truth.qa_spans:
                question_ids = tokenizer.encode_words(question.split())
                limit = self.encoder_config.max_seq_len - len(question_ids) - 2
                if limit <= 0:
                    raise RuntimeError(
                        'question {!r} does not fit max_seq_len'.format(
                            question))
                context = doc_model.tokenize(raw, tokenizer, limit)
                present = set(context.word_indices)
                if answer[0] not in present or answer[1] not in present:
                    logger.warning(
                        'Skipping question %r of %s: the answer was '
                        'truncated away.', question, name)
                    continue
                golds = [answer_text(context, answer)]
                examples.append(QaExample(name, question, question_ids,
                                          context, answer, golds))
        return examples

    def add_head(self, params):
        heads.add_head(params, 'qa', self.config.rng_seed)

    def example_loss(self, params, example, rng=None):
        start, end = qa_scores(params, example, self.config.box_source, rng)
        n = start.shape[0]
        s, e = example.answer_indices
        loss = T.mul(T.add(T.cross_entropy(T.reshape(start, (1, n)), [s]),
                           T.cross_entropy(T.reshape(end, (1, n)), [e])),
                     0.5)
        return LossValue(loss, 1)

    def predict(self, params, example, fingerprint=None):
        return qa_predict(params, example, self.config.span_cap,
                          self.config.box_source, fingerprint)

    def score(self, examples, predictions):
        if not examples:
            return {'task': 'qa', 'anls': None, 'exact_match': None}
        texts = [answer_text(ex.context, p)
                 for ex, p in zip(examples, predictions)]
        return {'task': 'qa',
                'anls': metrics.anls(texts, [ex.golds for ex in examples]),
                'exact_match': metrics.exact_match(
                    predictions, [ex.answer for ex in examples])}

    def prediction_record(self, example, prediction):
        return {'doc': example.name, 'question': example.question,
                'pred_span': list(prediction),
                'gold_span': list(example.answer),
                'pred_answer': answer_text(example.context, prediction),
                'golds': list(example.golds)}


def get_task(config, encoder_config, label_set=None):
    """Task instance for ``config.task``."""
    constructor = _TaskRegistry.get_constructor_for_key(config.task)
    return constructor(config, encoder_config, label_set)


FinetuneResult = namedtuple('FinetuneResult', 'params losses')


@log_timing(logger)
def finetune(params, examples, task):
    """
    Train the task head and the encoder on ``examples``.

    :param params: pre-trained :class:`ModelParams`; a copy is trained
    :param examples: training examples of ``task``
    :param task: :class:`Task`
    :return: :class:`FinetuneResult` with the per-step losses

    Pre-training heads are dropped; the task head is added fresh.
    """
    cfg = task.config
    if not examples:
        raise RuntimeError('finetune: no training examples')
    prefixes = ['embeddings'] + ['layer_{}'.format(i)
                                 for i in range(params.config.layers)]
    params = encoder.ModelParams(params.config, params.copy().select(prefixes))
    task.add_head(params)

    optimizer = AdamW(params.select(), total_steps=cfg.steps or None,
                      lr=cfg.lr, weight_decay=cfg.weight_decay)
    dropout = params.config.dropout_prob > 0
    losses = []
    order = []
    epoch = 0
    for step in range(cfg.steps):
        if len(order) < cfg.batch_size:
            order.extend(make_rng(cfg.rng_seed, STREAM_SHUFFLE,
                                  epoch).permutation(len(examples)))
            epoch += 1
        batch, order = order[:cfg.batch_size], order[cfg.batch_size:]
        rng = (make_rng(cfg.rng_seed, STREAM_DROPOUT, step)
               if dropout else None)
        loss = combine_losses([task.example_loss(params, examples[i], rng)
                               for i in batch])
        optimizer.zero_grad()
        T.backward(loss.value)
        optimizer.step()
        losses.append(loss.value.item())
        if step % 50 == 0:
            logger.info('Fine-tuning step %d of %d: loss %.4f.',
                        step + 1, cfg.steps, losses[-1])
    params.check_finite()
    return FinetuneResult(params, losses)


def _predict_one(args):
    task, params, example, fingerprint = args
    return task.predict(params, example, fingerprint)


def predict_all(params, examples, task, workers=1, fingerprint=None):
    """Predictions in example order, optionally over worker processes."""
    jobs = [(task, params, example, fingerprint) for example in examples]
    if workers > 1 and len(jobs) > 1:
        pool = multiprocessing.Pool(workers)
        try:
            return pool.map(_predict_one, jobs)
        finally:
            pool.close()
            pool.join()
    return [_predict_one(job) for job in jobs]


def evaluate(params, examples, task, workers=1, fingerprint=None):
    """
    Metric report and predictions of ``task`` on ``examples``.

    :return: ``(report, predictions)``
    """
    predictions = predict_all(params, examples, task, workers, fingerprint)
    report = task.score(examples, predictions)
    logger.info('Evaluated %d %s examples: %s', len(examples),
                task.config.task, report)
    return report, predictions
