#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

import unittest
import mock
from numpy.testing import assert_array_equal
from relayout.model import encoder
from relayout.pretrain import objectives as obj
from relayout.pretrain import trainer
from relayout.test import helper


def _encoder_config():
    return encoder.EncoderConfig(vocab_size=261, hidden_dim=8, layers=1,
                                 heads=2, ffn_dim=16, max_seq_len=64,
                                 max_local_pos=16, dropout_prob=0.0,
                                 init_std=0.1)


def _documents():
    return [
        helper.make_tokenized([['ab', 'cd'], ['ef']]),
        helper.make_tokenized([['gh'], ['ij', 'k'], ['lm']]),
        helper.make_tokenized([['no', 'pq', 'r']]),
    ]


class TestPretrainer(unittest.TestCase):
    "Pretrainer loop behaviour"
    def setUp(self):
        self.enc = _encoder_config()
        self.cfg = obj.PretrainConfig(epochs=2, batch_size=2, lr=1e-2,
                                      p_mlm=0.5, p_lop=0.5, theta_sim=-1.0,
                                      rng_seed=3)
        self.docs = _documents()

    def test_zero_epochs(self):
        "epochs=0 returns the initialization and an empty report"
        runner = trainer.Pretrainer(self.enc, self.cfg.copy(epochs=0))
        init = runner.init_params()

        params, reports = runner.run(self.docs)

        self.assertEqual(reports, [])
        for name in init.names:
            assert_array_equal(params[name].data, init[name].data)

    def test_empty_corpus(self):
        "an empty corpus should raise"
        with self.assertRaises(RuntimeError):
            trainer.pretrain([], self.enc, self.cfg)

    def test_rejects_raw_documents(self):
        "raw documents must be tokenized first"
        raw = helper.make_line_document([['ab']])

        with self.assertRaises(TypeError):
            trainer.pretrain([raw], self.enc, self.cfg)

    def test_one_report_per_epoch(self):
        "reports are numbered by epoch"
        _, reports = trainer.pretrain(self.docs, self.enc, self.cfg)

        self.assertEqual([r.epoch for r in reports], [0, 1])

    def test_tsc_only_in_final_epoch(self):
        "the 2-TSC average is absent before the final epoch"
        _, reports = trainer.pretrain(self.docs, self.enc, self.cfg)

        self.assertIsNone(reports[0].tsc)
        self.assertIsNotNone(reports[1].tsc)

    def test_mlm_only_has_no_lop(self):
        "alpha=0 never hides positions"
        cfg = self.cfg.copy(alpha=0.0, gamma=0.0)

        _, reports = trainer.pretrain(self.docs, self.enc, cfg)

        for report in reports:
            self.assertIsNone(report.lop)
            self.assertIsNone(report.lop_acc)
            self.assertIsNone(report.tsc)

    def test_targetless_batches_left_out(self):
        "batches without any target leave every average empty, total too"
        cfg = self.cfg.copy(p_mlm=0.0, p_lop=0.0, gamma=0.0)

        _, reports = trainer.pretrain(self.docs, self.enc, cfg)

        for report in reports:
            self.assertIsNone(report.mlm)
            self.assertIsNone(report.lop)
            self.assertIsNone(report.tsc)
            self.assertIsNone(report.total)

    def test_deterministic(self):
        "the same seed gives identical reports and parameters"
        a_params, a_reports = trainer.pretrain(self.docs, self.enc, self.cfg)
        b_params, b_reports = trainer.pretrain(self.docs, self.enc, self.cfg)

        self.assertEqual(a_reports, b_reports)
        for name in a_params.names:
            assert_array_equal(a_params[name].data, b_params[name].data)

    def test_different_seed(self):
        "another seed gives another run"
        _, a_reports = trainer.pretrain(self.docs, self.enc, self.cfg)
        _, b_reports = trainer.pretrain(self.docs, self.enc,
                                        self.cfg.copy(rng_seed=4))

        self.assertNotEqual(a_reports, b_reports)

    def test_accuracies_bounded(self):
        "accuracies lie in [0, 1]"
        _, reports = trainer.pretrain(self.docs, self.enc, self.cfg)

        for report in reports:
            for value in (report.mlm_acc, report.lop_acc):
                if value is not None:
                    self.assertGreaterEqual(value, 0.0)
                    self.assertLessEqual(value, 1.0)

    def test_store_receives_checkpoints(self):
        "a checkpoint is saved at every epoch boundary"
        store = mock.Mock()

        trainer.pretrain(self.docs, self.enc, self.cfg, store=store)

        epochs = [c[1]['epoch'] for c in store.save_checkpoint.call_args_list]
        self.assertEqual(epochs, [0, 1, 2])
        self.assertEqual(store.append_report.call_count, 2)
        name, record = store.append_report.call_args_list[0][0]
        self.assertEqual(name, 'loss_report.jsonl')
        self.assertEqual(sorted(record), sorted(trainer.REPORT_FIELDS))

    def test_missing_head(self):
        "parameters without pre-training heads are rejected"
        params = encoder.init_params(self.enc, 0)

        with self.assertRaises(RuntimeError):
            trainer.pretrain(self.docs, self.enc, self.cfg, params=params)

    def test_batches_cover_corpus(self):
        "each epoch's batches partition the corpus"
        runner = trainer.Pretrainer(self.enc, self.cfg)

        batches = runner.batches(5, 0)

        self.assertEqual([len(b) for b in batches], [2, 2, 1])
        self.assertEqual(sorted(sum(batches, [])), [0, 1, 2, 3, 4])


class TestLossReport(unittest.TestCase):
    "LossReport JSON record"
    def test_to_dict(self):
        "the record carries every field, absent ones as None"
        report = trainer.LossReport(0, 1.0, None, None, 1.0, 0.5, None)

        self.assertEqual(report.to_dict(),
                         {'epoch': 0, 'mlm': 1.0, 'lop': None, 'tsc': None,
                          'total': 1.0, 'mlm_acc': 0.5, 'lop_acc': None})
