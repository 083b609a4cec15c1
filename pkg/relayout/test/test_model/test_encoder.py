#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

import unittest
from collections import namedtuple
import numpy as np
from numpy.testing import assert_allclose, assert_array_equal
from relayout.document import doc_model
from relayout.model import encoder, heads
from relayout.tensor import gradcheck
from relayout.tensor import tensor as T
from relayout.test import helper
from relayout.util import make_rng

FakePlan = namedtuple('FakePlan', 'input_ids masked_position_tokens')


def _small_config(**kwargs):
    values = dict(vocab_size=300, hidden_dim=8, layers=1, heads=2,
                  ffn_dim=16, max_seq_len=32, max_local_pos=8,
                  dropout_prob=0.0, init_std=0.1)
    values.update(kwargs)
    return encoder.EncoderConfig(**values)


class TestEncoderConfig(unittest.TestCase):
    "EncoderConfig validation"
    def test_heads_divide_hidden(self):
        "hidden_dim must be divisible by heads"
        cfg = encoder.EncoderConfig(hidden_dim=10, heads=4)

        with self.assertRaises(ValueError):
            cfg.sanity_check()

    def test_bottleneck(self):
        "the predictor bottleneck defaults to a quarter of hidden_dim"
        self.assertEqual(encoder.EncoderConfig(hidden_dim=64).bottleneck_dim,
                         16)
        self.assertEqual(
            encoder.EncoderConfig(predictor_dim=5).bottleneck_dim, 5)

    def test_negative_std(self):
        "init_std must be non-negative"
        with self.assertRaises(ValueError):
            encoder.EncoderConfig(init_std=-0.1)


class TestInitParams(unittest.TestCase):
    "init_params should be deterministic Gaussian"
    def test_same_seed(self):
        "the same seed gives identical parameters"
        cfg = _small_config()
        a = encoder.init_params(cfg, 5)
        b = encoder.init_params(cfg, 5)

        for name in a.names:
            assert_array_equal(a[name].data, b[name].data)

    def test_zero_std(self):
        "init_std=0 gives all-zero parameters"
        params = heads.add_pretrain_heads(
            encoder.init_params(_small_config(init_std=0.0), 1), 1)

        for name in params.names:
            self.assertFalse(np.any(params[name].data), name)

    def test_statistics(self):
        "a large table has mean 0 and std init_std"
        cfg = _small_config(vocab_size=1250, hidden_dim=8, init_std=0.02)
        table = encoder.init_params(cfg, 3)['embeddings.token'].data

        n = table.size
        self.assertLess(abs(table.mean()), 4 * 0.02 / np.sqrt(n))
        self.assertLess(abs(table.std() - 0.02), 4 * 0.02 / np.sqrt(2 * n))

    def test_shapes(self):
        "tables follow the configuration"
        cfg = _small_config()
        params = encoder.init_params(cfg, 0)

        self.assertEqual(params['embeddings.pos1d'].shape, (34, 8))
        self.assertEqual(params['embeddings.height'].shape, (1001, 8))
        self.assertEqual(params['layer_0.ffn.w1'].shape, (8, 16))
        self.assertNotIn('layer_1.ffn.w1', params)

    def test_duplicate_name(self):
        "adding a parameter twice should raise"
        params = encoder.init_params(_small_config(), 0)

        with self.assertRaises(RuntimeError):
            params.add('embeddings.token', np.zeros(2))


class TestBuildInputs(unittest.TestCase):
    "build_inputs should only accept tokenized documents"
    def setUp(self):
        self.cfg = _small_config()
        self.doc = helper.make_tokenized([['ab', 'c'], ['de']])

    def test_rejects_ground_truth(self):
        "GroundTruth is not a model input"
        truth = doc_model.GroundTruth([[0]], ['question'])

        with self.assertRaises(TypeError):
            encoder.build_inputs(truth, self.cfg)

    def test_rejects_raw_document(self):
        "raw documents must be tokenized first"
        raw = helper.make_line_document([['ab']])

        with self.assertRaises(TypeError):
            encoder.build_inputs(raw, self.cfg)

    def test_plain(self):
        "inputs mirror the tokenized document"
        inputs = encoder.build_inputs(self.doc, self.cfg)

        assert_array_equal(inputs.token_ids, self.doc.tokens)
        assert_array_equal(inputs.position_ids, [1, 2, 3, 4, 5])
        self.assertTrue(inputs.attention_mask.all())

    def test_masked_positions(self):
        "masked positions use the reserved row"
        plan = FakePlan(list(self.doc.tokens), [3, 4])

        inputs = encoder.build_inputs(self.doc, self.cfg, plan)

        assert_array_equal(inputs.position_ids, [1, 2, 3, 33, 33])

    def test_padding(self):
        "padding extends every field and is masked out"
        inputs = encoder.build_inputs(self.doc, self.cfg, pad_to=8)

        self.assertEqual(len(inputs.token_ids), 8)
        assert_array_equal(inputs.attention_mask,
                           [True] * 5 + [False] * 3)

    def test_segment_boxes(self):
        "segment box source gives tokens their segment's hull"
        inputs = encoder.build_inputs(self.doc, self.cfg,
                                      box_source='segment')

        self.assertEqual(tuple(inputs.boxes[0]), tuple(inputs.boxes[2]))

    def test_too_long(self):
        "documents beyond max_seq_len are rejected"
        cfg = _small_config(max_seq_len=4)

        with self.assertRaises(RuntimeError):
            encoder.build_inputs(self.doc, cfg)


class TestEmbed(unittest.TestCase):
    "embed should sum token, position and box embeddings"
    def setUp(self):
        self.cfg = _small_config(hidden_dim=2, heads=1, init_std=0.0)
        self.params = encoder.init_params(self.cfg, 0)
        self.inputs = encoder.ModelInputs(
            np.array([7]), np.array([1]), np.array([[10, 20, 30, 50]]),
            np.ones(1, dtype=bool))

    def test_zero_tables(self):
        "zero tables give zero embeddings"
        assert_array_equal(encoder.embed(self.inputs, self.params).data,
                           np.zeros((1, 2)))

    def test_componentwise_sum(self):
        "rows [1, 2], [3, 4] and a box sum of [5, 6] give [9, 12]"
        self.params['embeddings.token'].data[7] = [1.0, 2.0]
        self.params['embeddings.pos1d'].data[1] = [3.0, 4.0]
        self.params['embeddings.x0'].data[10] = [1.0, 1.0]
        self.params['embeddings.y0'].data[20] = [1.0, 1.0]
        self.params['embeddings.x1'].data[30] = [1.0, 1.0]
        self.params['embeddings.y1'].data[50] = [1.0, 1.0]
        self.params['embeddings.width'].data[20] = [0.5, 1.0]
        self.params['embeddings.height'].data[30] = [0.5, 1.0]

        result = encoder.embed(self.inputs, self.params).data

        assert_allclose(result, [[9.0, 12.0]])

    def test_out_of_range(self):
        "a token id outside the table should raise"
        inputs = self.inputs._replace(token_ids=np.array([300]))

        with self.assertRaises(RuntimeError):
            encoder.embed(inputs, self.params)

    def test_same_word_same_box_contribution(self):
        "tokens of one word get identical box embeddings"
        cfg = _small_config()
        params = encoder.init_params(cfg, 2)
        doc = helper.make_tokenized([['abc']])
        inputs = encoder.build_inputs(doc, cfg)
        for name in ('embeddings.token', 'embeddings.pos1d'):
            params[name].data[:] = 0.0

        result = encoder.embed(inputs, params).data

        assert_array_equal(result[0], result[1])
        assert_array_equal(result[1], result[2])


class TestEncode(unittest.TestCase):
    "encode behaviour"
    def test_zero_layers_identity(self):
        "no layers returns the input"
        cfg = _small_config(layers=0)
        params = encoder.init_params(cfg, 0)
        x = T.Tensor(make_rng(1).normal(size=(3, 8)))

        assert_array_equal(encoder.encode(x, params).data, x.data)

    def test_permutation_equivariance(self):
        "permuting rows permutes the output"
        cfg = _small_config(layers=2, init_std=0.3)
        params = encoder.init_params(cfg, 4)
        x = make_rng(2).normal(size=(5, 8))
        perm = np.array([3, 0, 4, 1, 2])

        out = encoder.encode(T.Tensor(x), params).data
        permuted = encoder.encode(T.Tensor(x[perm]), params).data

        assert_allclose(permuted, out[perm], atol=1e-12)

    def test_padding_not_attended(self):
        "changing padded rows leaves real rows unchanged"
        cfg = _small_config(init_std=0.3)
        params = encoder.init_params(cfg, 4)
        rng = make_rng(3)
        x = rng.normal(size=(4, 8))
        y = x.copy()
        y[3] = rng.normal(size=8) * 10
        mask = np.array([True, True, True, False])

        a = encoder.encode(T.Tensor(x), params, mask).data
        b = encoder.encode(T.Tensor(y), params, mask).data

        assert_allclose(a[:3], b[:3], atol=1e-12)

    def test_deterministic_without_dropout(self):
        "forward is deterministic when dropout is off"
        cfg = _small_config(init_std=0.3)
        params = encoder.init_params(cfg, 4)
        inputs = encoder.build_inputs(helper.make_tokenized([['ab', 'cd']]),
                                      cfg)

        assert_array_equal(encoder.forward(params, inputs).data,
                           encoder.forward(params, inputs).data)

    def test_masking_position_changes_only_pos1d(self):
        "masking a position changes only that token's embedding"
        cfg = _small_config(init_std=0.3)
        params = encoder.init_params(cfg, 4)
        doc = helper.make_tokenized([['ab', 'cd']])
        plain = encoder.build_inputs(doc, cfg)
        masked = encoder.build_inputs(doc, cfg,
                                      FakePlan(list(doc.tokens), [1]))

        a = encoder.embed(plain, params).data
        b = encoder.embed(masked, params).data

        expected = (params['embeddings.pos1d'].data[33] -
                    params['embeddings.pos1d'].data[2])
        assert_allclose(b[1] - a[1], expected, atol=1e-12)
        assert_array_equal(np.delete(a, 1, axis=0), np.delete(b, 1, axis=0))

    def test_block_gradients(self):
        "one encoder block passes the finite-difference check"
        results = gradcheck.run_checks(encoder.encoder_checks(make_rng(6)))

        for result in results:
            self.assertTrue(result.passed,
                            '{}: {}'.format(result.name, result.max_error))


class TestHeads(unittest.TestCase):
    "task head shapes"
    def setUp(self):
        self.cfg = _small_config()
        self.params = heads.add_pretrain_heads(
            encoder.init_params(self.cfg, 0), 0)
        self.reps = T.Tensor(make_rng(0).normal(size=(3, 8)))

    def test_mlm(self):
        "mlm logits cover the vocabulary"
        self.assertEqual(heads.mlm_logits(self.params, self.reps).shape,
                         (3, 300))

    def test_lop(self):
        "lop logits cover max_local_pos classes"
        self.assertEqual(heads.lop_logits(self.params, self.reps).shape,
                         (3, 8))

    def test_predictor(self):
        "the predictor maps back to d through a bottleneck"
        self.assertEqual(self.params['predictor.hidden.w'].shape, (8, 2))
        self.assertEqual(heads.predictor(self.params, self.reps).shape,
                         (3, 8))

    def test_qa(self):
        "qa scores are one per token"
        heads.add_head(self.params, 'qa', 0)

        start, end = heads.qa_scores(self.params, self.reps)

        self.assertEqual(start.shape, (3,))
        self.assertEqual(end.shape, (3,))

    def test_sec_needs_tags(self):
        "the sec head needs a tag count"
        with self.assertRaises(RuntimeError):
            heads.add_head(self.params, 'sec', 0)
