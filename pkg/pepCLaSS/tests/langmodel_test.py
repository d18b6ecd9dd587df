# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
import os
import tempfile
import unittest

# Third party imports
import numpy as np
import torch

# Local imports
from pepCLaSS.common import ConfigError, DataError, SingleClassError
from pepCLaSS.corpus import load_corpus
from pepCLaSS.models.langmodel import (
    LmConfig,
    CharLanguageModel,
    random_strings,
    repeated_token_strings,
    sanity_panel,
    train_lm,
)
from pepCLaSS.models.seq_classifier import (
    SeqClfConfig,
    SequenceClassifier,
    seq_logit,
    majority_baseline,
    train_seq_classifier,
)


def uniform_lm():
    lm = CharLanguageModel(LmConfig(hidden_size=6, embedding_size=4))
    with torch.no_grad():
        lm.params["out.weight"].zero_()
        lm.params["out.bias"].zero_()
    return lm


def write_corpus(dirname, rows, labels=None):
    seq_fn = os.path.join(dirname, "seqs.csv")
    with open(seq_fn, "w") as fp:
        fp.write("id,sequence\n")
        for i, s in enumerate(rows):
            fp.write("s{},{}\n".format(i, s))
    label_files = []
    if labels:
        lab_fn = os.path.join(dirname, "labels.csv")
        with open(lab_fn, "w") as fp:
            fp.write("sequence,attribute,value\n")
            for s, v in labels.items():
                fp.write("{},AMP,{}\n".format(s, v))
        label_files.append(lab_fn)
    return load_corpus(seq_fn, label_files, ratios=(1.0, 0.0, 0.0))


class TestLanguageModel(unittest.TestCase):
    def test_uniform_perplexity(self):
        lm = uniform_lm()
        vocab_size = len(lm.vocabulary)
        self.assertAlmostEqual(lm.perplexity("KLW"), vocab_size)
        self.assertAlmostEqual(lm.corpus_perplexity(["K", "GLFDIVKK"]), vocab_size)

    def test_token_logprobs_cover_eos(self):
        lm = CharLanguageModel(LmConfig(hidden_size=6, embedding_size=4))
        lps = lm.token_logprobs(["KLW", "G"])
        self.assertEqual([len(x) for x in lps], [4, 2])
        self.assertTrue(all((x < 0).all() for x in lps))

    def test_perplexity_independent_of_batch(self):
        lm = CharLanguageModel(LmConfig(hidden_size=6, embedding_size=4))
        alone = lm.perplexity("GLFDIV")
        batched = lm.perplexity_batch(["KK", "GLFDIV", "FLPLIAGLAAKKW"])[1]
        self.assertAlmostEqual(alone, batched)

    def test_corpus_perplexity_empty(self):
        with self.assertRaises(DataError):
            uniform_lm().corpus_perplexity([])

    def test_reference_strings(self):
        rng = np.random.default_rng(0)
        strings = random_strings(50, (5, 10), rng)
        self.assertTrue(all(5 <= len(s) <= 10 for s in strings))
        repeated = repeated_token_strings(20, (5, 6), rng)
        self.assertTrue(all(len(set(s)) == 1 for s in repeated))
        panel = sanity_panel(uniform_lm(), [], count=20)
        self.assertIsNone(panel["test"])
        self.assertAlmostEqual(panel["random_strings"], 24.0)

    def test_save_load(self):
        lm = CharLanguageModel(LmConfig(hidden_size=6, embedding_size=4, seed=3))
        with tempfile.TemporaryDirectory() as d:
            fn = os.path.join(d, "lm.clsg")
            lm.save(fn)
            back = CharLanguageModel.load(fn)
        self.assertAlmostEqual(back.perplexity("KWKLF"), lm.perplexity("KWKLF"))

    def test_config(self):
        with self.assertRaises(ConfigError):
            LmConfig(hidden_size=0)
        self.assertEqual(LmConfig.from_dict({"hidden_size": 7, "unknown": 1}).hidden_size, 7)

    def test_training_lowers_loss(self):
        with tempfile.TemporaryDirectory() as d:
            corpus = write_corpus(d, ["K" * n for n in range(3, 20)] + ["W" * n for n in range(3, 20)])
            config = LmConfig(hidden_size=12, embedding_size=6, iterations=60, eval_interval=30, batch_size=8, lr=0.02)
            lm, records = train_lm(corpus, config, os.path.join(d, "lm.clsg"), log_fn=os.path.join(d, "lm.jsonl"))
            self.assertEqual(len(records), 2)
            self.assertIsNone(records[-1]["test_ppl"])
            self.assertLess(records[-1]["train_nll"], records[0]["train_nll"])
            self.assertLess(lm.perplexity("KKKKKKKK"), lm.perplexity("DEAQSTNM"))
            self.assertTrue(os.path.isfile(os.path.join(d, "lm.clsg")))


class TestSequenceClassifier(unittest.TestCase):
    def test_logits_shape(self):
        clf = SequenceClassifier("amp", SeqClfConfig(hidden_size=5, embedding_size=4))
        self.assertEqual(clf.attribute, "AMP")
        self.assertEqual(clf.logit_batch(["KK", "GLFDIV", "W"]).shape, (3,))
        self.assertEqual(clf.logit_batch([]).shape, (0,))
        self.assertAlmostEqual(seq_logit(clf, "GLFDIV"), clf.logit_batch(["KK", "GLFDIV"])[1])

    def test_majority_baseline(self):
        self.assertEqual(majority_baseline([1, 1, 0], [1, 0, 0, 0]), 0.25)
        self.assertIsNone(majority_baseline([1, 0], []))

    def test_save_load(self):
        clf = SequenceClassifier("Toxic", SeqClfConfig(hidden_size=5, embedding_size=4))
        with tempfile.TemporaryDirectory() as d:
            fn = os.path.join(d, "clf.clsg")
            clf.save(fn)
            back = SequenceClassifier.load(fn)
        self.assertEqual(back.attribute, "Toxic")
        np.testing.assert_array_equal(back.logit_batch(["KWK"]), clf.logit_batch(["KWK"]))

    def test_single_class(self):
        with tempfile.TemporaryDirectory() as d:
            corpus = write_corpus(d, ["KKK", "KKKK"], {"KKK": 1, "KKKK": 1})
        with self.assertRaises(SingleClassError):
            train_seq_classifier(corpus, "AMP", SeqClfConfig(hidden_size=4, embedding_size=4, iterations=2))

    def test_no_labels(self):
        with tempfile.TemporaryDirectory() as d:
            corpus = write_corpus(d, ["KKK", "KKKK"])
        with self.assertRaises(DataError):
            train_seq_classifier(corpus, "AMP", SeqClfConfig(hidden_size=4, embedding_size=4, iterations=2))

    def test_training_separates_classes(self):
        labels = {"K" * n: 1 for n in range(3, 15)}
        labels.update({"D" * n: 0 for n in range(3, 15)})
        with tempfile.TemporaryDirectory() as d:
            corpus = write_corpus(d, list(labels), labels)
            config = SeqClfConfig(hidden_size=8, embedding_size=4, dropout=0.0, iterations=80, eval_interval=40, batch_size=8, lr=0.02)
            fn = os.path.join(d, "clf.clsg")
            clf, report = train_seq_classifier(corpus, "amp", config, checkpoint_fn=fn)
            self.assertTrue(os.path.isfile(fn))
        self.assertEqual(report["train_size"], 24)
        self.assertGreaterEqual(report["train_accuracy"], 0.9)
        self.assertIsNone(report["test_accuracy"])
        self.assertGreater(seq_logit(clf, "KKKKK"), seq_logit(clf, "DDDDD"))


if __name__ == "__main__":
    unittest.main()
