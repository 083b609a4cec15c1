#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

"""
The document contract.

A :class:`RawDocument` holds only what an OCR engine can produce: words,
their global 1D positions (reading order), word-wise boxes in page pixels,
and text segments (runs of consecutive words on a line). Human-annotated
semantic groups and entity labels live in a separate :class:`GroundTruth`
object which no model-input builder accepts.

:func:`tokenize` turns a raw document into a :class:`TokenizedDocument`:
token ids, token-level global positions ``1..N`` in reading order, boxes on
a 0-1000 grid shared by all tokens of a word, and segments remapped to
token indices.
"""

import logging
import math
import numpy as np
import six

logger = logging.getLogger(__name__)

GRID_MAX = 1000
DEFAULT_MAX_SEQ_LEN = 512


class RawDocument(object):
    """
    OCR-level view of a single page.

    :param words: list of word strings
    :param global_positions: list of distinct non-negative ints; sorting the
                             words by them gives the reading order
    :param word_boxes: list of ``(x0, y0, x1, y1)`` in page pixels
    :param segments: list of lists of word indices; every word is in
                     exactly one segment and each segment is contiguous
                     in reading order
    :param page_size: ``(width, height)`` in pixels

    """
    def __init__(self, words, global_positions, word_boxes, segments,
                 page_size):
        self.words = [six.text_type(w) for w in words]
        self.global_positions = [int(p) for p in global_positions]
        self.word_boxes = [tuple(float(c) for c in b) for b in word_boxes]
        self.segments = [sorted(int(i) for i in s) for s in segments]
        self.page_size = tuple(float(d) for d in page_size)

        self._validate()

    @property
    def num_words(self):
        return len(self.words)

    @property
    def reading_order(self):
        """Word indices sorted by global position."""
        return sorted(range(self.num_words),
                      key=lambda i: self.global_positions[i])

    @property
    def segment_of_word(self):
        result = [None] * self.num_words
        for k, segment in enumerate(self.segments):
            for i in segment:
                result[i] = k
        return result

    def to_dict(self):
        return {
            'words': list(self.words),
            'positions': list(self.global_positions),
            'boxes': [list(_compact(b)) for b in self.word_boxes],
            'segments': [list(s) for s in self.segments],
            'page': list(_compact(self.page_size)),
        }

    @classmethod
    def from_dict(cls, values):
        try:
            return cls(values['words'], values['positions'], values['boxes'],
                       values['segments'], values['page'])
        except KeyError as e:
            raise RuntimeError(
                'document JSON is missing key {}'.format(e))

    #
    # private methods
    #
    def _validate(self):
        n_words = len(self.words)
        if len(self.global_positions) != n_words:
            raise RuntimeError(
                'got {} global positions for {} words'.format(
                    len(self.global_positions), n_words))
        if len(self.word_boxes) != n_words:
            raise RuntimeError(
                'got {} boxes for {} words'.format(
                    len(self.word_boxes), n_words))
        if len(self.page_size) != 2:
            raise RuntimeError('page_size must be (width, height)')
        width, height = self.page_size
        if width <= 0 or height <= 0:
            raise RuntimeError(
                'page dimensions must be > 0, got {}'.format(self.page_size))

        # positions
        if any(p < 0 for p in self.global_positions):
            raise RuntimeError('global positions must be non-negative')
        if len(set(self.global_positions)) != n_words:
            raise RuntimeError('global positions must be distinct')

        # boxes
        for i, box in enumerate(self.word_boxes):
            if len(box) != 4:
                raise RuntimeError(
                    'box of word {} must have 4 coordinates'.format(i))
            x0, y0, x1, y1 = box
            if x0 > x1 or y0 > y1:
                raise RuntimeError(
                    'box of word {} is inverted: {}'.format(i, box))
            if x0 < 0 or y0 < 0 or x1 > width or y1 > height:
                raise RuntimeError(
                    'box of word {} lies outside the {} page: {}'.format(
                        i, self.page_size, box))

        # segments
        owner = [None] * n_words
        for k, segment in enumerate(self.segments):
            if not segment:
                raise RuntimeError('segment {} is empty'.format(k))
            for i in segment:
                if i < 0 or i >= n_words:
                    raise RuntimeError(
                        'segment {} refers to unknown word {}'.format(k, i))
                if owner[i] is not None:
                    raise RuntimeError(
                        'word {} is in segments {} and {}'.format(
                            i, owner[i], k))
                owner[i] = k
        missing = [i for i, k in enumerate(owner) if k is None]
        if missing:
            raise RuntimeError(
                'words {} are not in any segment'.format(missing))

        rank = _ranks(self.global_positions)
        for k, segment in enumerate(self.segments):
            ranks = sorted(rank[i] for i in segment)
            if ranks[-1] - ranks[0] + 1 != len(ranks):
                raise RuntimeError(
                    'segment {} is not contiguous in reading order'.format(k))


class GroundTruth(object):
    """
    Evaluation-only annotations of a document.

    :param semantic_groups: list of disjoint lists of word indices
    :param entity_labels: one label string per word
    :param qa_spans: list of ``(question, (first_word, last_word))``

    Nothing that builds model inputs accepts this type; labels reach the
    fine-tuning heads only as targets.
    """
    def __init__(self, semantic_groups, entity_labels, qa_spans=()):
        self.semantic_groups = [sorted(int(i) for i in g)
                                for g in semantic_groups]
        self.entity_labels = [six.text_type(label) for label in entity_labels]
        self.qa_spans = [(six.text_type(q), (int(s), int(e)))
                         for q, (s, e) in qa_spans]

        self._validate()

    @property
    def num_words(self):
        return len(self.entity_labels)

    @property
    def group_of_word(self):
        result = [None] * self.num_words
        for g, group in enumerate(self.semantic_groups):
            for i in group:
                result[i] = g
        return result

    def to_dict(self):
        return {
            'groups': [list(g) for g in self.semantic_groups],
            'labels': list(self.entity_labels),
            'qa': [{'question': q, 'answer': [s, e]}
                   for q, (s, e) in self.qa_spans],
        }

    @classmethod
    def from_dict(cls, values):
        try:
            qa = [(item['question'], tuple(item['answer']))
                  for item in values.get('qa', [])]
            return cls(values['groups'], values['labels'], qa)
        except (KeyError, TypeError) as e:
            raise RuntimeError(
                'ground-truth JSON is malformed: {}'.format(e))

    def _validate(self):
        n_words = self.num_words
        seen = set()
        for g, group in enumerate(self.semantic_groups):
            if not group:
                raise RuntimeError('semantic group {} is empty'.format(g))
            for i in group:
                if i < 0 or i >= n_words:
                    raise RuntimeError(
                        'semantic group {} refers to unknown word {}'.format(
                            g, i))
                if i in seen:
                    raise RuntimeError(
                        'word {} is in more than one semantic group'.format(i))
                seen.add(i)
        for question, (start, end) in self.qa_spans:
            if not 0 <= start <= end < n_words:
                raise RuntimeError(
                    'answer span {} for question {!r} is out of range'.format(
                        (start, end), question))


class TokenizedDocument(object):
    """
    Token-level view produced by :func:`tokenize`.

    :param tokens: token ids in reading order
    :param token_global_positions: ``1..N``
    :param token_boxes: ``(N, 4)`` ints on the 0-1000 grid
    :param token_segments: list of lists of token indices
    :param word_of_token: source word index of each token
    :param words: source word strings, indexed like the raw document
    :param tokenizer_fingerprint: fingerprint of the tokenizer used

    """
    def __init__(self, tokens, token_global_positions, token_boxes,
                 token_segments, word_of_token, words,
                 tokenizer_fingerprint=None):
        self.tokens = [int(t) for t in tokens]
        self.token_global_positions = [int(p) for p in token_global_positions]
        self.token_boxes = np.asarray(token_boxes, dtype=np.int64).reshape(
            len(self.tokens), 4)
        self.token_segments = [list(s) for s in token_segments]
        self.word_of_token = [int(w) for w in word_of_token]
        self.words = list(words)
        self.tokenizer_fingerprint = tokenizer_fingerprint

    @property
    def num_tokens(self):
        return len(self.tokens)

    @property
    def word_indices(self):
        """Source word indices present in this document, in reading order."""
        result = []
        for w in self.word_of_token:
            if not result or result[-1] != w:
                result.append(w)
        return result

    @property
    def num_words(self):
        return len(self.word_indices)

    @property
    def tokens_of_word(self):
        result = {}
        for n, w in enumerate(self.word_of_token):
            result.setdefault(w, []).append(n)
        return result

    @property
    def first_token_of_word(self):
        return dict((w, toks[0])
                    for w, toks in six.iteritems(self.tokens_of_word))

    @property
    def segment_of_token(self):
        result = [None] * self.num_tokens
        for k, segment in enumerate(self.token_segments):
            for n in segment:
                result[n] = k
        return result


def _ranks(positions):
    order = sorted(range(len(positions)), key=lambda i: positions[i])
    rank = [0] * len(positions)
    for r, i in enumerate(order):
        rank[i] = r
    return rank


def _compact(values):
    # write integral floats as ints so JSON stays readable
    return [int(v) if float(v).is_integer() else v for v in values]


def normalize_box(box, page_size):
    """
    Map a pixel box onto the integer 0-1000 grid.

    :param box: ``(x0, y0, x1, y1)`` in pixels
    :param page_size: ``(width, height)`` in pixels
    :return: tuple of four ints, each ``floor(coord / dim * 1000)``
             clamped to ``[0, 1000]``

    """
    width, height = page_size
    if width <= 0 or height <= 0:
        raise RuntimeError(
            'normalize_box: page dimensions must be > 0, got {}'.format(
                page_size))
    dims = (width, height, width, height)
    result = []
    for coord, dim in zip(box, dims):
        value = int(math.floor(coord * float(GRID_MAX) / float(dim)))
        result.append(min(max(value, 0), GRID_MAX))
    return tuple(result)


def merged_box(segment, boxes):
    """
    Smallest box enclosing the boxes of ``segment``'s members.

    :param segment: iterable of indices into ``boxes``
    :param boxes: sequence of ``(x0, y0, x1, y1)``
    """
    segment = list(segment)
    if not segment:
        raise RuntimeError('merged_box: segment is empty')
    members = [boxes[i] for i in segment]
    return (min(b[0] for b in members), min(b[1] for b in members),
            max(b[2] for b in members), max(b[3] for b in members))


def box_center(box):
    return ((box[0] + box[2]) / 2.0, (box[1] + box[3]) / 2.0)


def segment_center_distance(segment_a, segment_b, boxes):
    """
    Euclidean distance between the centers of two segments' merged boxes.

    Distances are in the units of ``boxes`` (grid units for token boxes).
    """
    if not list(segment_a) or not list(segment_b):
        raise RuntimeError('segment_center_distance: segment is empty')
    ax, ay = box_center(merged_box(segment_a, boxes))
    bx, by = box_center(merged_box(segment_b, boxes))
    return math.hypot(ax - bx, ay - by)


def local_positions(segment):
    """
    1-based positions of a segment's tokens within the segment.

    :param segment: token indices, contiguous in reading order
    :return: ``[1, 2, ..., len(segment)]`` aligned to the sorted indices
    """
    indices = sorted(segment)
    if not indices:
        return []
    if indices[-1] - indices[0] + 1 != len(indices) or \
            len(set(indices)) != len(indices):
        raise RuntimeError(
            'local_positions: segment {} is not contiguous'.format(indices))
    return list(range(1, len(indices) + 1))


def segment_boxes(doc):
    """Per-token boxes where each token carries its segment's merged box."""
    boxes = doc.token_boxes.copy()
    for segment in doc.token_segments:
        boxes[segment] = merged_box(segment, doc.token_boxes)
    return boxes


def tokenize(doc, tokenizer, max_seq_len=DEFAULT_MAX_SEQ_LEN):
    """
    Tokenize a raw document and remap its layout to tokens.

    :param doc: :class:`RawDocument`
    :param tokenizer: :class:`relayout.document.tokenizer.TokenizerModel`
    :param max_seq_len: keep whole segments, in reading order, while the
                        token count stays within this limit
    :return: :class:`TokenizedDocument`

    """
    if not isinstance(doc, RawDocument):
        raise TypeError(
            'tokenize accepts a RawDocument, got {}'.format(
                type(doc).__name__))

    order = doc.reading_order
    rank = _ranks(doc.global_positions)
    segments = sorted(doc.segments, key=lambda s: min(rank[i] for i in s))

    pieces = {}
    for i in order:
        ids = tokenizer.encode_word(doc.words[i])
        if not ids:
            raise RuntimeError(
                'empty tokenization of word {} ({!r})'.format(
                    i, doc.words[i]))
        pieces[i] = ids

    # keep whole segments until the limit is reached
    kept = []
    total = 0
    for segment in segments:
        count = sum(len(pieces[i]) for i in segment)
        if total + count > max_seq_len:
            break
        kept.append(segment)
        total += count
    if not kept and segments:
        raise RuntimeError(
            'first segment has more than {} tokens'.format(max_seq_len))
    if len(kept) < len(segments):
        logger.debug('truncated document from %d to %d segments',
                     len(segments), len(kept))

    tokens = []
    word_of_token = []
    boxes = []
    token_segments = []
    for segment in kept:
        members = []
        for i in sorted(segment, key=lambda w: rank[w]):
            box = normalize_box(doc.word_boxes[i], doc.page_size)
            for token_id in pieces[i]:
                members.append(len(tokens))
                tokens.append(token_id)
                word_of_token.append(i)
                boxes.append(box)
        token_segments.append(members)

    return TokenizedDocument(
        tokens=tokens,
        token_global_positions=list(range(1, len(tokens) + 1)),
        token_boxes=boxes,
        token_segments=token_segments,
        word_of_token=word_of_token,
        words=doc.words,
        tokenizer_fingerprint=tokenizer.fingerprint)
