#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

"""
Evaluation metrics: word-level F1 for entity classification and ANLS for
extractive question answering.
"""

from collections import namedtuple
import Levenshtein
import numpy as np
from sklearn.metrics import precision_recall_fscore_support
from relayout.finetune.bio import OUTSIDE_TAG, bio_decode

ANLS_THRESHOLD = 0.5

F1Score = namedtuple('F1Score', 'precision recall f1')


def _check_lengths(pred, gold):
    if len(pred) != len(gold):
        raise RuntimeError(
            'predicted and gold tag sequences differ in length '
            '({} != {})'.format(len(pred), len(gold)))


def _f1(tp, n_pred, n_gold):
    precision = tp / float(n_pred) if n_pred else 0.0
    recall = tp / float(n_gold) if n_gold else 0.0
    if precision + recall == 0:
        return F1Score(precision, recall, 0.0)
    return F1Score(precision, recall,
                   2 * precision * recall / (precision + recall))


def word_f1(pred, gold):
    """
    Micro-averaged tag F1 over words tagged non-``O`` on either side.

    :param pred: predicted tags
    :param gold: gold tags
    :return: :class:`F1Score`

    A word is a true positive when its predicted tag equals the gold tag,
    prefix included.
    """
    _check_lengths(pred, gold)
    labels = sorted((set(pred) | set(gold)) - set([OUTSIDE_TAG]))
    if not labels:
        return F1Score(0.0, 0.0, 0.0)
    precision, recall, f1, _ = precision_recall_fscore_support(
        list(gold), list(pred), labels=labels, average='micro',
        zero_division=0)
    return F1Score(float(precision), float(recall), float(f1))


def span_f1(pred, gold):
    """Entity-level F1 over exactly matching decoded spans."""
    _check_lengths(pred, gold)
    pred_spans = set(bio_decode(pred))
    gold_spans = set(bio_decode(gold))
    return _f1(len(pred_spans & gold_spans), len(pred_spans), len(gold_spans))


def normalize_answer(text):
    """Lower case, trimmed, runs of white space collapsed."""
    return ' '.join(text.strip().lower().split())


def levenshtein(a, b):
    return Levenshtein.distance(a, b)


def nls(a, b):
    """Normalized Levenshtein similarity ``1 - d(a, b) / max(|a|, |b|)``."""
    length = max(len(a), len(b))
    if length == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / float(length)


def anls_score(prediction, golds, threshold=ANLS_THRESHOLD):
    """
    Score of one answer against its gold answers.

    :param prediction: predicted answer string
    :param golds: non-empty list of gold answer strings
    :param threshold: similarities below this count as zero
    :return: best thresholded similarity over ``golds``

    """
    golds = list(golds)
    if not golds:
        raise RuntimeError('anls needs at least one gold answer')
    predicted = normalize_answer(prediction)
    best = 0.0
    for gold in golds:
        score = nls(predicted, normalize_answer(gold))
        if score >= threshold:
            best = max(best, score)
    return best


def anls(predictions, gold_lists, threshold=ANLS_THRESHOLD):
    """Mean :func:`anls_score` over a dataset."""
    if len(predictions) != len(gold_lists):
        raise RuntimeError(
            'anls: {} predictions for {} questions'.format(
                len(predictions), len(gold_lists)))
    if not predictions:
        raise RuntimeError('anls: no questions')
    return float(np.mean([anls_score(p, g, threshold)
                          for p, g in zip(predictions, gold_lists)]))


def exact_match(predicted_spans, gold_spans):
    """Fraction of predicted word spans equal to the gold span."""
    if len(predicted_spans) != len(gold_spans):
        raise RuntimeError(
            'exact_match: {} predictions for {} questions'.format(
                len(predicted_spans), len(gold_spans)))
    if not gold_spans:
        return 0.0
    hits = sum(1 for p, g in zip(predicted_spans, gold_spans)
               if tuple(p) == tuple(g))
    return hits / float(len(gold_spans))
