#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

import math
import unittest
import numpy as np
from numpy.testing import assert_array_equal
from relayout.document import doc_model
from relayout.document.tokenizer import TokenizerModel
from relayout.test import helper
from relayout.util import make_rng


class TestRawDocumentValidation(unittest.TestCase):
    "RawDocument should enforce the OCR-level constraints"
    def setUp(self):
        self.words = ['a', 'b', 'c']
        self.positions = [0, 1, 2]
        self.boxes = [(0, 0, 10, 10), (20, 0, 30, 10), (0, 20, 10, 30)]
        self.segments = [[0, 1], [2]]
        self.page = (100, 100)

    def test_accepts_valid(self):
        "a valid document should construct"
        doc = doc_model.RawDocument(self.words, self.positions, self.boxes,
                                    self.segments, self.page)

        self.assertEqual(doc.num_words, 3)
        self.assertEqual(doc.segment_of_word, [0, 0, 1])

    def test_length_mismatch(self):
        "position and word counts must agree"
        with self.assertRaises(RuntimeError):
            doc_model.RawDocument(self.words, [0, 1], self.boxes,
                                  self.segments, self.page)

    def test_duplicate_positions(self):
        "global positions must be distinct"
        with self.assertRaises(RuntimeError):
            doc_model.RawDocument(self.words, [0, 0, 1], self.boxes,
                                  self.segments, self.page)

    def test_inverted_box(self):
        "boxes must satisfy x0 <= x1"
        boxes = list(self.boxes)
        boxes[1] = (30, 0, 20, 10)
        with self.assertRaises(RuntimeError):
            doc_model.RawDocument(self.words, self.positions, boxes,
                                  self.segments, self.page)

    def test_box_outside_page(self):
        "boxes must lie within the page"
        boxes = list(self.boxes)
        boxes[2] = (0, 20, 10, 130)
        with self.assertRaises(RuntimeError):
            doc_model.RawDocument(self.words, self.positions, boxes,
                                  self.segments, self.page)

    def test_word_in_two_segments(self):
        "segments must not overlap"
        with self.assertRaises(RuntimeError):
            doc_model.RawDocument(self.words, self.positions, self.boxes,
                                  [[0, 1], [1, 2]], self.page)

    def test_word_without_segment(self):
        "every word must be in a segment"
        with self.assertRaises(RuntimeError):
            doc_model.RawDocument(self.words, self.positions, self.boxes,
                                  [[0, 1]], self.page)

    def test_non_contiguous_segment(self):
        "segments must be contiguous in reading order"
        with self.assertRaises(RuntimeError) as cm:
            doc_model.RawDocument(self.words, self.positions, self.boxes,
                                  [[0, 2], [1]], self.page)
        self.assertIn('contiguous', str(cm.exception))

    def test_contiguity_uses_reading_order(self):
        "contiguity should follow positions, not storage order"
        doc = doc_model.RawDocument(self.words, [0, 2, 1], self.boxes,
                                    [[0, 2], [1]], self.page)

        self.assertEqual(doc.reading_order, [0, 2, 1])

    def test_json_record(self):
        "to_dict and from_dict should agree"
        doc = doc_model.RawDocument(self.words, self.positions, self.boxes,
                                    self.segments, self.page)

        again = doc_model.RawDocument.from_dict(doc.to_dict())

        self.assertEqual(again.to_dict(), doc.to_dict())
        self.assertEqual(doc.to_dict()['page'], [100, 100])


class TestGroundTruth(unittest.TestCase):
    "GroundTruth validation"
    def test_overlapping_groups(self):
        "semantic groups must be disjoint"
        with self.assertRaises(RuntimeError):
            doc_model.GroundTruth([[0, 1], [1]], ['question'] * 2)

    def test_answer_out_of_range(self):
        "qa spans must lie within the document"
        with self.assertRaises(RuntimeError):
            doc_model.GroundTruth([[0]], ['answer'], [('answer', (0, 1))])

    def test_group_of_word(self):
        "group_of_word should invert the groups"
        truth = doc_model.GroundTruth([[2], [0, 1]], ['a', 'b', 'c'])

        self.assertEqual(truth.group_of_word, [1, 1, 0])


class TestNormalizeBox(unittest.TestCase):
    "normalize_box should map pixels onto the 0-1000 grid"
    def test_full_page(self):
        "the full page maps to the full grid"
        self.assertEqual(doc_model.normalize_box((0, 0, 640, 480), (640, 480)),
                         (0, 0, 1000, 1000))

    def test_midpoint(self):
        "the midpoint maps to 500"
        self.assertEqual(
            doc_model.normalize_box((50, 50, 50, 50), (100, 100)),
            (500, 500, 500, 500))

    def test_hand_value(self):
        "(33, 0, 66, 0) on 100x10 should give (330, 0, 660, 0)"
        self.assertEqual(doc_model.normalize_box((33, 0, 66, 0), (100, 10)),
                         (330, 0, 660, 0))

    def test_zero_dimension(self):
        "a zero page dimension should raise"
        with self.assertRaises(RuntimeError):
            doc_model.normalize_box((0, 0, 0, 0), (0, 10))

    def test_idempotent_on_grid(self):
        "a page of 1000x1000 should leave grid boxes unchanged"
        rng = make_rng(1)
        for _ in range(100):
            x0, x1 = sorted(rng.integers(0, 1001, size=2))
            y0, y1 = sorted(rng.integers(0, 1001, size=2))
            box = (int(x0), int(y0), int(x1), int(y1))
            self.assertEqual(doc_model.normalize_box(box, (1000, 1000)), box)

    def test_monotone(self):
        "larger coordinates never map to smaller grid values"
        values = [doc_model.normalize_box((c, 0, c, 0), (777, 1))[0]
                  for c in np.linspace(0, 777, 500)]

        self.assertEqual(values, sorted(values))


class TestSegmentGeometry(unittest.TestCase):
    "merged_box and segment_center_distance"
    def test_single_box(self):
        "a singleton segment's hull is its box"
        self.assertEqual(doc_model.merged_box([0], [(1, 2, 3, 4)]),
                         (1, 2, 3, 4))

    def test_two_boxes(self):
        "the hull spans both boxes"
        boxes = [(0, 0, 10, 10), (20, 0, 30, 10)]

        self.assertEqual(doc_model.merged_box([0, 1], boxes), (0, 0, 30, 10))

    def test_hull_matches_loop(self):
        "the hull should match a brute-force loop"
        rng = make_rng(9)
        boxes = []
        for _ in range(3):
            x0, y0 = rng.integers(0, 500, size=2)
            boxes.append((x0, y0, x0 + rng.integers(1, 300),
                          y0 + rng.integers(1, 300)))
        expected = [min(b[0] for b in boxes), min(b[1] for b in boxes),
                    max(b[2] for b in boxes), max(b[3] for b in boxes)]

        self.assertEqual(list(doc_model.merged_box([0, 1, 2], boxes)),
                         expected)

    def test_empty_segment(self):
        "an empty segment has no hull"
        with self.assertRaises(RuntimeError):
            doc_model.merged_box([], [(0, 0, 1, 1)])

    def test_identical_segments(self):
        "a segment is at distance 0 from itself"
        boxes = [(0, 0, 10, 10)]

        self.assertEqual(
            doc_model.segment_center_distance([0], [0], boxes), 0.0)

    def test_three_four_five(self):
        "centers (0, 0) and (3, 4) are 5 apart"
        boxes = [(-1, -1, 1, 1), (2, 3, 4, 5)]

        self.assertAlmostEqual(
            doc_model.segment_center_distance([0], [1], boxes), 5.0)

    def test_random_layout(self):
        "distances should match a recomputation from member boxes"
        rng = make_rng(10)
        boxes = [tuple(int(v) for v in (x, y, x + w, y + h))
                 for x, y, w, h in zip(rng.integers(0, 800, 10),
                                       rng.integers(0, 800, 10),
                                       rng.integers(1, 200, 10),
                                       rng.integers(1, 200, 10))]
        segments = [[0, 1], [2], [3, 4, 5], [6, 7], [8, 9]]

        def center(segment):
            xs = [boxes[i][0] for i in segment] + \
                [boxes[i][2] for i in segment]
            ys = [boxes[i][1] for i in segment] + \
                [boxes[i][3] for i in segment]
            return (min(xs) + max(xs)) / 2.0, (min(ys) + max(ys)) / 2.0

        for a in segments:
            for b in segments:
                (ax, ay), (bx, by) = center(a), center(b)
                self.assertAlmostEqual(
                    doc_model.segment_center_distance(a, b, boxes),
                    math.sqrt((ax - bx) ** 2 + (ay - by) ** 2))


class TestLocalPositions(unittest.TestCase):
    "local_positions should restart at 1 in every segment"
    def test_three_tokens(self):
        "a 3-token segment gives [1, 2, 3]"
        self.assertEqual(doc_model.local_positions([4, 5, 6]), [1, 2, 3])

    def test_singleton(self):
        "a 1-token segment gives [1]"
        self.assertEqual(doc_model.local_positions([7]), [1])

    def test_document(self):
        "segments of sizes 2, 3, 1 give [1, 2, 1, 2, 3, 1]"
        segments = [[0, 1], [2, 3, 4], [5]]

        result = []
        for segment in segments:
            result.extend(doc_model.local_positions(segment))

        self.assertEqual(result, [1, 2, 1, 2, 3, 1])
        self.assertEqual(result.count(1), len(segments))

    def test_non_contiguous(self):
        "a gap in the segment should raise"
        with self.assertRaises(RuntimeError):
            doc_model.local_positions([0, 2])


class TestTokenize(unittest.TestCase):
    "tokenize should remap positions, boxes and segments onto tokens"
    def test_identity_split(self):
        "words that are single tokens keep their count"
        tok = TokenizerModel([(b't', b'o'), (b'd', b'a'), (b'da', b'y')])
        doc = helper.make_line_document([['to', 'day']])

        result = doc_model.tokenize(doc, tok)

        self.assertEqual(result.num_tokens, 2)
        self.assertEqual(result.token_global_positions, [1, 2])

    def test_one_word_three_tokens(self):
        "a word split into three tokens shares one box"
        doc = helper.make_line_document([['abc']])

        result = doc_model.tokenize(doc, helper.byte_tokenizer())

        self.assertEqual(result.token_global_positions, [1, 2, 3])
        self.assertEqual(len(set(map(tuple, result.token_boxes))), 1)
        assert_array_equal(result.token_boxes[0],
                           doc_model.normalize_box(doc.word_boxes[0],
                                                   doc.page_size))

    def test_segment_remap(self):
        "two segments whose second words split in two give sizes [3, 3]"
        tok = TokenizerModel([(b'a', b'b'), (b'c', b'd')])
        doc = helper.make_line_document([['ab', 'xy'], ['cd', 'zw']])

        result = doc_model.tokenize(doc, tok)

        self.assertEqual([len(s) for s in result.token_segments], [3, 3])
        self.assertEqual(result.token_segments, [[0, 1, 2], [3, 4, 5]])

    def test_word_of_token_monotone(self):
        "word_of_token is non-decreasing in reading order"
        doc = doc_model.RawDocument(
            ['late', 'early'], [5, 1], [(0, 20, 40, 38), (0, 0, 50, 18)],
            [[1], [0]], (100, 100))

        result = doc_model.tokenize(doc, helper.byte_tokenizer())

        self.assertEqual(result.word_of_token,
                         [1, 1, 1, 1, 1, 0, 0, 0, 0])
        self.assertEqual(result.word_indices, [1, 0])

    def test_one_box_per_word(self):
        "grouping token boxes by word gives one distinct box per word"
        result = helper.make_tokenized([['alpha', 'beta'], ['gamma']])

        for word, tokens in result.tokens_of_word.items():
            boxes = set(tuple(result.token_boxes[n]) for n in tokens)
            self.assertEqual(len(boxes), 1)

    def test_empty_word(self):
        "a word without tokens should raise"
        doc = doc_model.RawDocument([''], [0], [(0, 0, 1, 1)], [[0]],
                                    (10, 10))

        with self.assertRaises(RuntimeError) as cm:
            doc_model.tokenize(doc, helper.byte_tokenizer())
        self.assertIn('empty tokenization', str(cm.exception))

    def test_truncates_at_segment_boundary(self):
        "whole segments are dropped once the limit is reached"
        doc = helper.make_line_document([['aaa'], ['bb'], ['c']])

        result = doc_model.tokenize(doc, helper.byte_tokenizer(),
                                    max_seq_len=5)

        self.assertEqual(result.num_tokens, 5)
        self.assertEqual(len(result.token_segments), 2)

    def test_first_segment_too_long(self):
        "a first segment over the limit cannot be truncated"
        doc = helper.make_line_document([['aaaaaa']])

        with self.assertRaises(RuntimeError):
            doc_model.tokenize(doc, helper.byte_tokenizer(), max_seq_len=5)

    def test_rejects_ground_truth(self):
        "ground truth is not a valid tokenizer input"
        truth = doc_model.GroundTruth([[0]], ['question'])

        with self.assertRaises(TypeError):
            doc_model.tokenize(truth, helper.byte_tokenizer())

    def test_segment_boxes(self):
        "segment_boxes gives every token its segment's hull"
        result = helper.make_tokenized([['ab', 'cd']])

        boxes = doc_model.segment_boxes(result)

        hull = doc_model.merged_box(result.token_segments[0],
                                    result.token_boxes)
        for row in boxes:
            self.assertEqual(tuple(row), hull)
