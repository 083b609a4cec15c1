#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

"""
Evaluation-only analysis of encoder representations.

Ground truth is read here to score how well pooled segment
representations cluster by semantic group; nothing in this module feeds
back into training.
"""

import logging
from collections import namedtuple
import numpy as np
from sklearn.metrics.pairwise import cosine_similarity
from relayout.model import encoder
from relayout.pretrain.objectives import pooled_vectors

logger = logging.getLogger(__name__)

GroupSimilarity = namedtuple('GroupSimilarity',
                             'same different n_same n_different')

DumpRow = namedtuple('DumpRow', 'kind id segment group vector')


def representations(params, doc, box_source='word'):
    """``(N, d)`` numpy token representations of an unmasked document."""
    inputs = encoder.build_inputs(doc, params.config, box_source=box_source)
    return encoder.forward(params, inputs).data


def segment_groups(doc, truth):
    """Semantic group of every token segment, taken from its first word."""
    group_of_word = truth.group_of_word
    return [group_of_word[doc.word_of_token[segment[0]]]
            for segment in doc.token_segments]


def group_similarity(params, documents, box_source='word'):
    """
    Mean cosine similarity of pooled segment representations.

    :param params: :class:`ModelParams`
    :param documents: ``(TokenizedDocument, GroundTruth)`` pairs
    :return: :class:`GroupSimilarity` over same-group and different-group
             segment pairs inside each document

    Segments outside every group take part in no pair.
    """
    same = []
    different = []
    for doc, truth in documents:
        if len(doc.token_segments) < 2:
            continue
        pooled = np.array(pooled_vectors(
            representations(params, doc, box_source), doc.token_segments))
        sims = cosine_similarity(pooled)
        groups = segment_groups(doc, truth)
        for a in range(len(groups)):
            for b in range(a + 1, len(groups)):
                if groups[a] is None or groups[b] is None:
                    continue
                if groups[a] == groups[b]:
                    same.append(sims[a, b])
                else:
                    different.append(sims[a, b])
    result = GroupSimilarity(
        float(np.mean(same)) if same else None,
        float(np.mean(different)) if different else None,
        len(same), len(different))
    logger.info('Same-group similarity %s over %d pairs, different-group %s '
                'over %d pairs.', result.same, result.n_same,
                result.different, result.n_different)
    return result


def dump_rows(params, doc, truth=None, box_source='word'):
    """
    Token and pooled segment representations for external projection.

    Token rows come first, then one row per segment. ``group`` is ``None``
    without ground truth.
    """
    reps = representations(params, doc, box_source)
    segment_of_token = doc.segment_of_token
    groups = (segment_groups(doc, truth) if truth is not None
              else [None] * len(doc.token_segments))
    rows = []
    for n in range(doc.num_tokens):
        k = segment_of_token[n]
        rows.append(DumpRow('token', n, k, groups[k], reps[n]))
    for k, vector in enumerate(pooled_vectors(reps, doc.token_segments)):
        rows.append(DumpRow('segment', k, k, groups[k], vector))
    return rows


def csv_header(dim):
    return ['kind', 'id', 'segment', 'group'] + \
        ['dim{}'.format(i) for i in range(dim)]


def csv_record(row):
    group = '' if row.group is None else row.group
    return [row.kind, row.id, row.segment, group] + \
        ['{!r}'.format(float(v)) for v in row.vector]
