#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

"""
Synthetic form-like corpora.

Every document is a stack of semantic groups. A group carries one entity
label, is drawn from that label's share of the word pool and is laid out
as a rectangular block of lines in its own row band. The OCR view of the
document fragments each group into text segments: one per line, with
extra random splits at word boundaries. Segments therefore refine the
groups and never cross them.

Each document draws from its own random streams, keyed by the document
index and by purpose, so that documents can be generated in any order or
in parallel, and changing the fragmentation noise leaves words and layout
untouched.
"""

import logging
import multiprocessing
from collections import namedtuple
import six
from relayout import options
from relayout.options import option
from relayout.document import doc_model
from relayout.util import make_rng, STREAM_CONTENT, STREAM_FRAGMENT, STREAM_QA

logger = logging.getLogger(__name__)

DEFAULT_LABELS = ['question', 'answer', 'header', 'other']

DEFAULT_VOCAB = [
    'name', 'date', 'address', 'phone', 'total', 'amount', 'signature',
    'number', 'company', 'city', 'state', 'zip', 'email', 'title', 'fax',
    'account', 'invoice', 'order', 'quantity', 'price', 'tax', 'due',
    'john', 'smith', 'march', 'main', 'street', 'new', 'york', 'paid',
    'form', 'report', 'summary', 'section', 'part', 'record', 'review',
    'approved', 'page', 'notes', 'see', 'attached', 'per', 'request', 'copy',
    'filed', 'office', 'use', 'only', 'received', 'by', 'dept', 'code',
    'ref', 'yes', 'no', 'pending', 'draft', 'final', 'internal',
]

CHAR_WIDTH = 10
LINE_HEIGHT = 20
GROUP_GAP = 20
MARGIN = 20
MIN_PAGE = 1000

QA_TEMPLATES = ['{}', 'what is the {}', 'find the {}']

GeneratedDocument = namedtuple('GeneratedDocument', 'raw truth')


def _is_word_list(value):
    return (value is None or
            (isinstance(value, list) and
             all(isinstance(w, six.string_types) and w and ' ' not in w
                 for w in value)))


def _is_label_list(value):
    return (isinstance(value, list) and len(value) > 0 and
            len(set(value)) == len(value) and
            all(isinstance(v, six.string_types) and v for v in value))


class CorpusConfig(options.Options):
    """
    Parameters of the synthetic generator.

    ``vocab`` of ``None`` selects the built-in word pool.
    """
    _fields_ = (
        ('document_count', 10),
        ('vocab', None),
        ('groups_per_doc', [3, 6]),
        ('words_per_group', [2, 6]),
        ('line_width_chars', 24),
        ('label_set', list(DEFAULT_LABELS)),
        ('segment_split_prob', 0.1),
        ('segment_mode', 'lines'),
        ('rng_seed', 0),
    )

    document_count = option('document_count', options.is_non_negative_int,
                            'be an integer >= 0')
    vocab = option('vocab', _is_word_list,
                   'be null or a list of non-empty words without spaces')
    groups_per_doc = option('groups_per_doc', options.is_int_range,
                            'be an integer range [lo, hi] with 0 <= lo <= hi')
    words_per_group = option('words_per_group', options.is_int_range,
                             'be an integer range [lo, hi] with 0 <= lo <= hi')
    line_width_chars = option('line_width_chars', options.is_positive_int,
                              'be an integer > 0')
    label_set = option('label_set', _is_label_list,
                       'be a non-empty list of distinct labels')
    segment_split_prob = option('segment_split_prob', options.is_probability,
                                'be in [0, 1]')
    segment_mode = option('segment_mode', options.one_of('lines', 'groups'),
                          'be one of lines, groups')
    rng_seed = option('rng_seed', options.is_non_negative_int,
                      'be an integer >= 0')

    @property
    def word_pool(self):
        return list(DEFAULT_VOCAB) if self.vocab is None else list(self.vocab)

    def sanity_check(self):
        if self.groups_per_doc[0] < 1:
            raise ValueError('groups_per_doc must start at >= 1')
        if self.words_per_group[0] < 1:
            raise ValueError('words_per_group must start at >= 1')
        if len(self.word_pool) < len(self.label_set):
            raise ValueError(
                'infeasible corpus: {} words cannot cover {} labels'.format(
                    len(self.word_pool), len(self.label_set)))


def label_pools(cfg):
    """Split the word pool among the labels; word ``i`` goes to label ``i % n``."""
    n_labels = len(cfg.label_set)
    pools = dict((label, []) for label in cfg.label_set)
    for i, word in enumerate(cfg.word_pool):
        pools[cfg.label_set[i % n_labels]].append(word)
    return pools


class Layout(object):
    """
    Geometry of a generated page.

    :param boxes: pixel box of each word
    :param line_of_word: global line index of each word
    :param page_size: ``(width, height)``

    """
    def __init__(self, boxes, line_of_word, page_size):
        self.boxes = boxes
        self.line_of_word = line_of_word
        self.page_size = page_size


def _block_lines(words, width_chars):
    # greedy line filling; an overlong word gets a line of its own
    lines = [[]]
    used = 0
    for word in words:
        needed = len(word) if not lines[-1] else used + 1 + len(word)
        if lines[-1] and needed > width_chars:
            lines.append([word])
            used = len(word)
        else:
            lines[-1].append(word)
            used = needed
    return lines


def _block_x(label, block_width, page_width):
    if label == 'answer':
        return page_width // 2 + MARGIN
    if label == 'header':
        return max((page_width - block_width) // 2, MARGIN)
    return MARGIN


def layout_groups(group_words, group_labels, cfg):
    """
    Place groups as blocks in consecutive row bands.

    :param group_words: list of word lists, one per group
    :param group_labels: label of each group
    :param cfg: :class:`CorpusConfig`
    :return: :class:`Layout` for the flattened words in reading order

    """
    longest = max([len(w) for words in group_words for w in words] + [0])
    block_chars = max(cfg.line_width_chars, longest)
    page_width = max(MIN_PAGE, 2 * (block_chars * CHAR_WIDTH + 2 * MARGIN))

    boxes = []
    line_of_word = []
    y = MARGIN
    line_index = 0
    for words, label in zip(group_words, group_labels):
        lines = _block_lines(words, cfg.line_width_chars)
        widest = max(len(' '.join(line)) for line in lines) * CHAR_WIDTH
        x_start = _block_x(label, widest, page_width)
        for line in lines:
            x = x_start
            for word in line:
                width = len(word) * CHAR_WIDTH
                boxes.append((x, y, x + width, y + LINE_HEIGHT - 4))
                line_of_word.append(line_index)
                x += width + CHAR_WIDTH
            y += LINE_HEIGHT
            line_index += 1
        y += GROUP_GAP

    page_height = max(MIN_PAGE, y + MARGIN)
    return Layout(boxes, line_of_word, (page_width, page_height))


def fragment_groups(groups, layout, cfg, rng):
    """
    Break semantic groups into OCR-style text segments.

    Every group is split where its lines break; each remaining word
    boundary inside a line is split with probability
    ``cfg.segment_split_prob``. One draw is consumed per boundary whether
    or not it can split.

    :param groups: list of word-index lists, each in reading order
    :param layout: :class:`Layout` giving ``line_of_word``
    :param cfg: :class:`CorpusConfig`
    :param rng: ``numpy.random.Generator``
    :return: list of segments (word-index lists)

    """
    segments = []
    for group in groups:
        current = [group[0]]
        for prev, word in zip(group[:-1], group[1:]):
            split = rng.random() < cfg.segment_split_prob
            if split or layout.line_of_word[prev] != layout.line_of_word[word]:
                segments.append(current)
                current = []
            current.append(word)
        segments.append(current)
    return segments


def generate_qa(doc, truth, rng=None):
    """
    Extractive QA pairs for a generated document.

    For every label other than ``other`` present in the document, the
    question names the label and the answer is the first group carrying it.

    :param doc: :class:`RawDocument`
    :param truth: :class:`GroundTruth`
    :param rng: optional generator choosing the question phrasing
    :return: list of ``(question, (first_word, last_word))``

    """
    rank = dict((w, r) for r, w in enumerate(doc.reading_order))
    groups = sorted(truth.semantic_groups, key=lambda g: rank[g[0]])
    pairs = []
    seen = set()
    for group in groups:
        label = truth.entity_labels[group[0]]
        if label == 'other' or label in seen:
            continue
        seen.add(label)
        template = QA_TEMPLATES[0]
        if rng is not None:
            template = QA_TEMPLATES[int(rng.integers(len(QA_TEMPLATES)))]
        pairs.append((template.format(label), (min(group), max(group))))
    return pairs


def generate_document(cfg, index):
    """Generate document ``index`` of the corpus described by ``cfg``."""
    content = make_rng(cfg.rng_seed, STREAM_CONTENT, index)
    pools = label_pools(cfg)

    lo, hi = cfg.groups_per_doc
    n_groups = int(content.integers(lo, hi + 1))
    group_words = []
    group_labels = []
    for _ in range(n_groups):
        label = cfg.label_set[int(content.integers(len(cfg.label_set)))]
        pool = pools[label]
        lo, hi = cfg.words_per_group
        n_words = int(content.integers(lo, hi + 1))
        group_words.append(
            [pool[int(i)] for i in content.integers(len(pool), size=n_words)])
        group_labels.append(label)

    layout = layout_groups(group_words, group_labels, cfg)

    words = [w for group in group_words for w in group]
    labels = [label for group, label in zip(group_words, group_labels)
              for _ in group]
    groups = []
    for group in group_words:
        start = sum(len(g) for g in groups)
        groups.append(list(range(start, start + len(group))))

    if cfg.segment_mode == 'groups':
        segments = [list(g) for g in groups]
    else:
        segments = fragment_groups(
            groups, layout, cfg, make_rng(cfg.rng_seed, STREAM_FRAGMENT, index))

    raw = doc_model.RawDocument(
        words, list(range(len(words))), layout.boxes, segments,
        layout.page_size)
    truth = doc_model.GroundTruth(groups, labels)
    qa = generate_qa(raw, truth, make_rng(cfg.rng_seed, STREAM_QA, index))
    truth = doc_model.GroundTruth(groups, labels, qa)
    return GeneratedDocument(raw, truth)


def _generate_one(args):
    cfg_dict, index = args
    return generate_document(CorpusConfig.from_dict(cfg_dict), index)


def generate_corpus(cfg, workers=1):
    """
    Generate ``cfg.document_count`` documents.

    :param cfg: :class:`CorpusConfig`
    :param workers: number of processes; the result does not depend on it
    :return: list of :class:`GeneratedDocument`

    """
    cfg.sanity_check()
    logger.info('generating %d documents with seed %d',
                cfg.document_count, cfg.rng_seed)
    if workers > 1 and cfg.document_count > 1:
        jobs = [(cfg.to_dict(), i) for i in range(cfg.document_count)]
        pool = multiprocessing.Pool(workers)
        try:
            return pool.map(_generate_one, jobs)
        finally:
            pool.close()
            pool.join()
    return [generate_document(cfg, i) for i in range(cfg.document_count)]
