#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

import unittest
from relayout.finetune.bio import BioLabelSet, Span, bio_encode, bio_decode
from relayout.util import make_rng


LABELS = BioLabelSet(['question', 'answer', 'header', 'other'])


class TestBioLabelSet(unittest.TestCase):
    "BioLabelSet tag inventory"
    def test_tag_count(self):
        "there are 2 tags per class plus O"
        self.assertEqual(len(LABELS), 7)
        self.assertEqual(LABELS.tags[:3], ['O', 'B-question', 'I-question'])

    def test_index(self):
        "tags and indices are inverse"
        for i, tag in enumerate(LABELS.tags):
            self.assertEqual(LABELS.index(tag), i)
            self.assertEqual(LABELS.tag(i), tag)

    def test_unknown_tag(self):
        "an unknown tag should raise"
        with self.assertRaises(RuntimeError):
            LABELS.index('B-date')

    def test_round_trip_dict(self):
        "to_dict / from_dict preserve the label set"
        self.assertEqual(BioLabelSet.from_dict(LABELS.to_dict()), LABELS)


class TestBioEncode(unittest.TestCase):
    "bio_encode tagging"
    def test_one_group(self):
        "a 3-word question group gives B, I, I"
        tags = bio_encode(['question'] * 3, [[0, 1, 2]], LABELS)

        self.assertEqual(tags, ['B-question', 'I-question', 'I-question'])

    def test_all_other(self):
        "other maps to O"
        tags = bio_encode(['other'] * 3, [[0, 1], [2]], LABELS)

        self.assertEqual(tags, ['O', 'O', 'O'])

    def test_alternating_single_words(self):
        "alternating 1-word groups give only B tags"
        labels = ['question', 'answer', 'question', 'answer']

        tags = bio_encode(labels, [[0], [1], [2], [3]], LABELS)

        self.assertEqual(tags, ['B-question', 'B-answer', 'B-question',
                                'B-answer'])

    def test_reading_order(self):
        "B goes to the first word in reading order"
        tags = bio_encode(['answer'] * 2, [[0, 1]], LABELS, order=[1, 0])

        self.assertEqual(tags, ['I-answer', 'B-answer'])

    def test_ungrouped_word(self):
        "a labelled word outside every group is its own entity"
        tags = bio_encode(['header', 'other'], [], LABELS)

        self.assertEqual(tags, ['B-header', 'O'])

    def test_unknown_class(self):
        "an unknown class should raise"
        with self.assertRaises(RuntimeError):
            bio_encode(['date'], [[0]], LABELS)


class TestBioDecode(unittest.TestCase):
    "bio_decode span recovery"
    def test_simple(self):
        "[B-q, I-q, O] gives one span"
        self.assertEqual(bio_decode(['B-q', 'I-q', 'O']),
                         [Span('q', 0, 1)])

    def test_repair(self):
        "a lone I-q is repaired to a span"
        self.assertEqual(bio_decode(['I-q']), [Span('q', 0, 0)])

    def test_class_change(self):
        "an I tag of another class starts a new span"
        self.assertEqual(bio_decode(['B-q', 'I-a', 'I-a']),
                         [Span('q', 0, 0), Span('a', 1, 2)])

    def test_b_after_b(self):
        "consecutive B tags give separate spans"
        self.assertEqual(bio_decode(['B-q', 'B-q']),
                         [Span('q', 0, 0), Span('q', 1, 1)])

    def test_malformed(self):
        "tags without a class should raise"
        with self.assertRaises(RuntimeError):
            bio_decode(['B-'])

    def test_round_trip(self):
        "decoding the encoding of contiguous groups recovers them"
        rng = make_rng(0)
        classes = ['question', 'answer', 'header', 'other']
        for _ in range(200):
            n_groups = int(rng.integers(1, 8))
            sizes = rng.integers(1, 5, size=n_groups)
            groups = []
            labels = []
            start = 0
            for size in sizes:
                label = classes[int(rng.integers(len(classes)))]
                groups.append(list(range(start, start + size)))
                labels.extend([label] * size)
                start += size

            spans = bio_decode(bio_encode(labels, groups, LABELS))

            expected = [Span(labels[g[0]], g[0], g[-1]) for g in groups
                        if labels[g[0]] != 'other']
            self.assertEqual(spans, expected)
