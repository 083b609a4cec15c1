#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

"""
BIO tagging of entity classes.

Entity classification is cast as sequence labelling over words: the
first word of an entity is tagged ``B-<class>``, the remaining words
``I-<class>`` and words outside any entity ``O``.
"""

from collections import namedtuple

OUTSIDE_TAG = 'O'
OUTSIDE_LABEL = 'other'

Span = namedtuple('Span', 'label start end')


class BioLabelSet(object):
    """
    Tag inventory for a set of entity classes.

    :param labels: entity labels; ``outside_label`` among them maps to ``O``
    :param outside_label: label of words outside any entity

    """
    def __init__(self, labels, outside_label=OUTSIDE_LABEL):
        self.outside_label = outside_label
        self.classes = []
        for label in labels:
            if label != outside_label and label not in self.classes:
                self.classes.append(label)
        self.tags = [OUTSIDE_TAG]
        for c in self.classes:
            self.tags.extend(['B-' + c, 'I-' + c])
        self._index = dict((tag, i) for i, tag in enumerate(self.tags))
        assert len(self.tags) == 2 * len(self.classes) + 1

    def __len__(self):
        return len(self.tags)

    def __eq__(self, other):
        return (isinstance(other, BioLabelSet) and
                self.tags == other.tags and
                self.outside_label == other.outside_label)

    def __ne__(self, other):
        return not self == other

    def index(self, tag):
        try:
            return self._index[tag]
        except KeyError:
            raise RuntimeError('unknown BIO tag {!r}'.format(tag))

    def tag(self, index):
        return self.tags[index]

    def to_dict(self):
        return {'classes': list(self.classes),
                'outside_label': self.outside_label}

    @classmethod
    def from_dict(cls, values):
        return cls(values['classes'], values['outside_label'])


def bio_encode(entity_labels, groups, label_set, order=None):
    """
    Per-word BIO tags.

    :param entity_labels: label of every word
    :param groups: lists of word indices forming the entities
    :param label_set: :class:`BioLabelSet`
    :param order: reading order of the words; defaults to index order
    :return: list of tags indexed by word

    A word outside every group forms an entity on its own unless its label
    is the outside label.
    """
    n = len(entity_labels)
    order = list(range(n)) if order is None else list(order)
    rank = dict((w, r) for r, w in enumerate(order))
    for label in set(entity_labels):
        if label != label_set.outside_label and \
                label not in label_set.classes:
            raise RuntimeError(
                'unknown entity class {!r}; known classes are {}'.format(
                    label, ', '.join(label_set.classes)))

    tags = [OUTSIDE_TAG] * n
    grouped = set()
    for group in groups:
        grouped.update(group)
        label = entity_labels[min(group, key=lambda w: rank[w])]
        if label == label_set.outside_label:
            continue
        first = min(group, key=lambda w: rank[w])
        for w in group:
            tags[w] = ('B-' if w == first else 'I-') + label
    for w in range(n):
        if w not in grouped and entity_labels[w] != label_set.outside_label:
            tags[w] = 'B-' + entity_labels[w]
    return tags


def _split(tag):
    if tag == OUTSIDE_TAG:
        return None, None
    prefix, _, label = tag.partition('-')
    if prefix not in ('B', 'I') or not label:
        raise RuntimeError('malformed BIO tag {!r}'.format(tag))
    return prefix, label


def bio_decode(tags):
    """
    Entity spans of a tag sequence.

    :param tags: tags in sequence order
    :return: list of :class:`Span` with inclusive ``start`` and ``end``

    Decoding is relaxed: an ``I-c`` that does not continue an open ``c``
    span starts a new span, as if it were ``B-c``.
    """
    spans = []
    current = None
    for i, tag in enumerate(tags):
        prefix, label = _split(tag)
        if prefix is None:
            if current is not None:
                spans.append(Span(*current))
            current = None
        elif prefix == 'I' and current is not None and current[0] == label:
            current[2] = i
        else:
            if current is not None:
                spans.append(Span(*current))
            current = [label, i, i]
    if current is not None:
        spans.append(Span(*current))
    return spans
