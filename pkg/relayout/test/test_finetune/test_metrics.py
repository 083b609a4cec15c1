#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

import unittest
from relayout.finetune import metrics
from relayout.util import make_rng


def _edit_distance(a, b):
    # dynamic-programming reference
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a):
        current = [i + 1]
        for j, cb in enumerate(b):
            current.append(min(previous[j + 1] + 1, current[j] + 1,
                               previous[j] + (ca != cb)))
        previous = current
    return previous[-1]


class TestWordF1(unittest.TestCase):
    "word_f1 counting"
    def test_perfect(self):
        "identical tags with a non-O word give 1"
        tags = ['B-q', 'I-q', 'O']

        self.assertAlmostEqual(metrics.word_f1(tags, tags).f1, 1.0)

    def test_all_outside_predictions(self):
        "predicting only O gives zero recall"
        result = metrics.word_f1(['O', 'O'], ['B-q', 'I-q'])

        self.assertEqual(result.recall, 0.0)
        self.assertEqual(result.f1, 0.0)

    def test_hand_count(self):
        "2 of 3 right plus 1 spurious gives 2/3 everywhere"
        gold = ['B-q', 'I-q', 'B-a', 'O']
        pred = ['B-q', 'I-q', 'O', 'B-h']

        result = metrics.word_f1(pred, gold)

        self.assertAlmostEqual(result.precision, 2.0 / 3.0)
        self.assertAlmostEqual(result.recall, 2.0 / 3.0)
        self.assertAlmostEqual(result.f1, 2.0 / 3.0)

    def test_prefix_matters(self):
        "B-q against I-q is wrong"
        result = metrics.word_f1(['B-q', 'B-q'], ['B-q', 'I-q'])

        self.assertAlmostEqual(result.precision, 0.5)
        self.assertAlmostEqual(result.recall, 0.5)

    def test_swap_symmetry(self):
        "swapping pred and gold swaps precision and recall"
        gold = ['B-q', 'O', 'B-a', 'I-a', 'O']
        pred = ['B-q', 'B-h', 'B-a', 'O', 'O']

        a = metrics.word_f1(pred, gold)
        b = metrics.word_f1(gold, pred)

        self.assertAlmostEqual(a.precision, b.recall)
        self.assertAlmostEqual(a.recall, b.precision)
        self.assertAlmostEqual(a.f1, b.f1)

    def test_length_mismatch(self):
        "sequences of different length should raise"
        with self.assertRaises(RuntimeError):
            metrics.word_f1(['O'], ['O', 'O'])

    def test_span_level(self):
        "span F1 needs whole entities right"
        gold = ['B-q', 'I-q', 'B-a']
        pred = ['B-q', 'O', 'B-a']

        result = metrics.span_f1(pred, gold)

        self.assertAlmostEqual(result.precision, 0.5)
        self.assertAlmostEqual(result.recall, 0.5)


class TestAnls(unittest.TestCase):
    "Levenshtein similarity and ANLS"
    def test_identical(self):
        "identical strings score 1"
        self.assertEqual(metrics.anls_score('total', ['total']), 1.0)

    def test_one_substitution(self):
        "abc against abd scores 2/3"
        self.assertAlmostEqual(metrics.anls_score('abc', ['abd']), 2.0 / 3.0)

    def test_threshold(self):
        "a similarity of 0.4 is cut to 0"
        # 3 edits over 5 characters
        self.assertAlmostEqual(metrics.nls('abcde', 'abxyz'), 0.4)
        self.assertEqual(metrics.anls_score('abcde', ['abxyz']), 0.0)

    def test_at_threshold(self):
        "a similarity of exactly 0.5 counts"
        self.assertEqual(metrics.anls_score('ab', ['ax']), 0.5)

    def test_normalization(self):
        "case and surrounding white space are ignored"
        self.assertEqual(metrics.anls_score('  Total  Due ', ['total due']),
                         1.0)

    def test_best_gold(self):
        "the best gold counts and order does not matter"
        a = metrics.anls_score('abc', ['xyz', 'abd'])
        b = metrics.anls_score('abc', ['abd', 'xyz'])

        self.assertAlmostEqual(a, 2.0 / 3.0)
        self.assertEqual(a, b)

    def test_no_gold(self):
        "an empty gold list should raise"
        with self.assertRaises(RuntimeError):
            metrics.anls_score('abc', [])

    def test_dataset_mean(self):
        "anls averages over questions"
        self.assertAlmostEqual(
            metrics.anls(['abc', 'q'], [['abc'], ['zzz']]), 0.5)

    def test_distance_oracle(self):
        "the edit distance matches dynamic programming on random pairs"
        rng = make_rng(11)
        alphabet = 'abcd '
        for _ in range(1000):
            a = ''.join(alphabet[i] for i in
                        rng.integers(len(alphabet),
                                     size=int(rng.integers(0, 9))))
            b = ''.join(alphabet[i] for i in
                        rng.integers(len(alphabet),
                                     size=int(rng.integers(0, 9))))
            self.assertEqual(metrics.levenshtein(a, b), _edit_distance(a, b))
            score = metrics.anls_score(a, [b])
            self.assertGreaterEqual(score, 0.0)
            self.assertLessEqual(score, 1.0)


class TestExactMatch(unittest.TestCase):
    "exact_match over spans"
    def test_fraction(self):
        "one of two spans right gives 0.5"
        self.assertEqual(
            metrics.exact_match([(1, 2), (3, 3)], [(1, 2), (3, 4)]), 0.5)
