#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

import os
import unittest
from relayout import analysis, cli
from relayout.document import doc_model
from relayout.document.tokenizer import TokenizerModel
from relayout.test import helper
from relayout.slow_tests import desk


class SegmentClusteringTestCase(unittest.TestCase, helper.TempDirHelper):
    "the final clustering epoch pulls same-group segments together"
    def setUp(self):
        self.setUpTempDir()

    def tearDown(self):
        self.tearDownTempDir()

    def test_same_group_similarity(self):
        "same-group similarity rises and beats different-group by 0.05"
        for seed in desk.SEEDS:
            cfg = desk.run_config(seed, pretrain={'epochs': 3})
            tokenizer = TokenizerModel([])
            documents = desk.dataset(cfg)
            path = 'seed_{}'.format(seed)
            cli.run_pretrain(cfg, tokenizer, documents,
                             cli.open_store(os.path.join(path, 'pre')))

            pairs = [(doc_model.tokenize(raw, tokenizer,
                                         cfg.encoder.max_seq_len), truth)
                     for _, raw, truth in documents]
            before = analysis.group_similarity(
                desk.load_epoch(path, cfg.pretrain.epochs - 1), pairs)
            after = analysis.group_similarity(
                desk.load_epoch(path, cfg.pretrain.epochs), pairs)

            self.assertGreater(after.same, before.same, seed)
            self.assertGreaterEqual(after.same - after.different, 0.05, seed)
