# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
import os
import tempfile
import unittest
from collections import OrderedDict

# Third party imports
import numpy as np
import torch

# Local imports
from pepCLaSS.common import ModelError, NonFiniteError, ConfigError
from pepCLaSS.corpus import PAD, Vocabulary
from pepCLaSS.models.tensor_core import (
    ParameterSet,
    adam_update,
    clip_grad_norm,
    init_rnn,
    gru_forward,
    lstm_forward,
    masked_cross_entropy,
    grad_check,
    save_checkpoint,
    load_checkpoint,
)


def small_gru(direction="bidirectional", seed=0):
    params = ParameterSet(seed=seed)
    params.init_matrix("embedding", (24, 6))
    init_rnn(params, "gru", 6, 5, cell="gru", direction=direction)
    return params


class TestParameterSet(unittest.TestCase):
    def test_seeded_init(self):
        a, b = small_gru(seed=3), small_gru(seed=3)
        for name in a:
            torch.testing.assert_close(a[name], b[name])
        self.assertFalse(torch.equal(a["embedding"], small_gru(seed=4)["embedding"]))

    def test_duplicate_and_missing(self):
        params = small_gru()
        with self.assertRaises(ModelError):
            params.init_zeros("embedding", (2,))
        with self.assertRaises(ModelError):
            params["decoder.w"]

    def test_arrays_round_trip(self):
        params = small_gru()
        params.step = 7
        back = ParameterSet.from_arrays(params.to_arrays())
        self.assertEqual(back.step, 7)
        self.assertEqual(list(back), list(params))
        for name in params:
            torch.testing.assert_close(back[name], params[name].detach())


class TestAdam(unittest.TestCase):
    def test_first_step(self):
        params = ParameterSet()
        params.add("w", [1.0, -1.0])
        adam_update(params, {"w": torch.tensor([2.0, -0.5], dtype=torch.float64)}, lr=0.1)
        # First bias corrected step moves every coordinate by lr against the gradient sign
        torch.testing.assert_close(params["w"].detach(), torch.tensor([0.9, -0.9], dtype=torch.float64), atol=1e-6, rtol=0)
        self.assertEqual(params.step, 1)

    def test_non_finite_gradient_leaves_params(self):
        params = ParameterSet()
        params.add("a", [1.0])
        params.add("b", [2.0])
        grads = {"a": torch.tensor([1.0], dtype=torch.float64), "b": torch.tensor([float("nan")], dtype=torch.float64)}
        with self.assertRaises(NonFiniteError):
            adam_update(params, grads)
        self.assertEqual(params["a"].item(), 1.0)
        self.assertEqual(params.step, 0)

    def test_missing_gradient(self):
        params = ParameterSet()
        params.add("a", [1.0])
        with self.assertRaises(ModelError):
            adam_update(params, {})

    def test_clip(self):
        params = ParameterSet()
        w = params.add("w", [3.0, 4.0])
        (w * torch.tensor([3.0, 4.0], dtype=torch.float64)).sum().mul(2).backward()
        norm = clip_grad_norm(params, 5.0)
        self.assertAlmostEqual(norm, 10.0)
        self.assertAlmostEqual(float(w.grad.norm()), 5.0, places=6)


class TestRecurrentLayers(unittest.TestCase):
    def test_gru_zero_weights(self):
        params = ParameterSet()
        init_rnn(params, "gru", 3, 4, cell="gru")
        with torch.no_grad():
            for name in params:
                params[name].zero_()
        x = torch.ones(2, 1, 3, dtype=torch.float64)
        h0 = torch.ones(1, 2, 4, dtype=torch.float64)
        out, final = gru_forward(params, x, "forward", 4, h0=h0)
        # r = z = 1/2 and n = 0, so h' = h/2
        torch.testing.assert_close(final[0], torch.full((2, 4), 0.5, dtype=torch.float64))
        self.assertEqual(tuple(out.shape), (2, 1, 4))

    def test_padding_does_not_change_states(self):
        params = small_gru()
        vocab = Vocabulary()
        short = torch.as_tensor(vocab.tokenize("KLW", 3))
        padded = torch.as_tensor(vocab.tokenize("KLW", 8))
        out_s, fin_s = gru_forward(params, short.unsqueeze(0), "bidirectional")
        out_p, fin_p = gru_forward(params, padded.unsqueeze(0), "bidirectional")
        torch.testing.assert_close(fin_s, fin_p)
        torch.testing.assert_close(out_s[0], out_p[0, : len(short)])

    def test_lstm_shapes(self):
        params = ParameterSet()
        params.init_matrix("embedding", (24, 6))
        init_rnn(params, "lstm", 6, 7, cell="lstm", direction="bidirectional")
        tokens = Vocabulary().tokenize_batch(["KK", "GLW"], 5)
        out, final = lstm_forward(params, tokens, "bidirectional")
        self.assertEqual(tuple(out.shape), (2, 7, 14))
        self.assertEqual(tuple(final.shape), (2, 2, 7))

    def test_bad_direction(self):
        with self.assertRaises(ConfigError):
            small_gru(direction="sideways")

    def test_masked_cross_entropy(self):
        logits = torch.zeros(1, 3, 24, dtype=torch.float64)
        targets = torch.tensor([[5, 6, PAD]])
        self.assertAlmostEqual(masked_cross_entropy(logits, targets).item(), np.log(24))
        nll = masked_cross_entropy(logits, targets, reduction="none")
        self.assertEqual(nll[0, 2].item(), 0.0)


class TestGradCheck(unittest.TestCase):
    def test_gru_loss(self):
        params = small_gru()
        params.init_matrix("out.weight", (24, 10))
        tokens = Vocabulary().tokenize_batch(["GLFDIVKK", "KWK"], 10)

        def loss_fn():
            out, _ = gru_forward(params, tokens, "bidirectional")
            logits = out @ params["out.weight"].t()
            return masked_cross_entropy(logits, torch.as_tensor(tokens))

        self.assertLess(grad_check(loss_fn, params, probe_count=30, seed=1), 1e-5)


class TestCheckpoint(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.fn = os.path.join(self.tmp.name, "model.clsg")

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip(self):
        tensors = OrderedDict([("a", np.arange(6.0).reshape(2, 3)), ("scalar", np.array(2.5)), ("empty", np.zeros((0, 4)))])
        save_checkpoint(self.fn, tensors, {"kind": "test", "config": {"x": 1}})
        back, meta = load_checkpoint(self.fn, expected_kind="test")
        self.assertEqual(list(back), ["a", "scalar", "empty"])
        np.testing.assert_array_equal(back["a"], tensors["a"])
        self.assertEqual(back["scalar"].shape, ())
        self.assertEqual(back["empty"].shape, (0, 4))
        self.assertEqual(meta["config"], {"x": 1})

    def test_byte_identical(self):
        tensors = OrderedDict([("a", np.ones(3))])
        save_checkpoint(self.fn, tensors, {"kind": "test"})
        with open(self.fn, "rb") as fp:
            first = fp.read()
        save_checkpoint(self.fn, tensors, {"kind": "test"})
        with open(self.fn, "rb") as fp:
            self.assertEqual(fp.read(), first)

    def test_errors(self):
        save_checkpoint(self.fn, OrderedDict([("a", np.ones(100))]), {"kind": "test"})
        with self.assertRaises(ModelError):
            load_checkpoint(self.fn, expected_kind="autoencoder")
        with open(self.fn, "rb") as fp:
            data = fp.read()
        with open(self.fn, "wb") as fp:
            fp.write(data[:-40])
        with self.assertRaises(ModelError):
            load_checkpoint(self.fn)
        with open(self.fn, "wb") as fp:
            fp.write(b"NOPE" + data[4:])
        with self.assertRaises(ModelError):
            load_checkpoint(self.fn)


if __name__ == "__main__":
    unittest.main()
