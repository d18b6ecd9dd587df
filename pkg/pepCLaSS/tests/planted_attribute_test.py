# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
import os
import tempfile
import unittest
from collections import OrderedDict

# Third party imports
import numpy as np

# Local imports
from pepCLaSS.corpus import load_corpus
from pepCLaSS.analysis.descriptors import net_charge
from pepCLaSS.models.autoencoder import AeConfig, train, evaluate
from pepCLaSS.models.latent_models import embed_corpus, fit_gmm, fit_latent_classifier
from pepCLaSS.class_sampler import AttributeTarget, parallel_class_sample, decode_latents

SLOW = os.environ.get("PEPCLASS_SLOW_TESTS") == "1"

CORPUS_SIZE = 5000
POSITIVE_FRACTION = 0.2
ITERATIONS = 20000
SAMPLE_COUNT = 500


def oracle(seq):
    return "KK" in seq and net_charge(seq) >= 3


def planted_sequences(count, seed=0):
    """Random peptides, a fifth of them carrying a KK motif plus an arginine and no acidic residue"""
    rng = np.random.default_rng(seed)
    background = list("ADEFGILSVWKR")
    weights = np.array([1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0.3, 0.3])
    weights /= weights.sum()
    neutral = list("AFGILSVW")
    seqs = OrderedDict()
    while len(seqs) < count:
        length = int(rng.integers(6, 13))
        if rng.random() < POSITIVE_FRACTION:
            residues = list(rng.choice(neutral, length - 3))
            pos = int(rng.integers(0, len(residues) + 1))
            residues[pos:pos] = ["K", "K"]
            residues.insert(int(rng.integers(0, len(residues) + 1)), "R")
        else:
            residues = list(rng.choice(background, length, p=weights))
        seqs["".join(residues)] = None
    return list(seqs)


@unittest.skipUnless(SLOW, "set PEPCLASS_SLOW_TESTS=1")
class TestPlantedAttribute(unittest.TestCase):
    """Full desk scale run: WAE and beta-VAE on a corpus with a planted attribute"""

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        seqs = planted_sequences(CORPUS_SIZE)
        seq_fn = os.path.join(cls.tmp.name, "planted.csv")
        label_fn = os.path.join(cls.tmp.name, "planted_labels.csv")
        with open(seq_fn, "w") as fp:
            fp.write("id,sequence\n")
            for i, s in enumerate(seqs):
                fp.write("p{},{}\n".format(i, s))
        with open(label_fn, "w") as fp:
            fp.write("sequence,attribute,value\n")
            for s in seqs:
                fp.write("{},AMP,{}\n".format(s, int(oracle(s))))
        cls.corpus = load_corpus(seq_fn, [label_fn], max_seq_length=25, quiet=True)

        base = dict(hidden_size=80, latent_dim=16, iterations=ITERATIONS, eval_interval=5000, upsample_ratio=0, seed=0)
        cls.wae, _ = train(cls.corpus, AeConfig(objective="WAE", mmd_sigma=7.0, logvar_reg_weight=1e-3, **base), os.path.join(cls.tmp.name, "wae.clsg"))
        cls.vae, _ = train(cls.corpus, AeConfig(objective="betaVAE", beta_end=1.0, **base), os.path.join(cls.tmp.name, "vae.clsg"))

        cls.train_latents = embed_corpus(cls.wae, cls.corpus, samples_per_seq=5, seed=0, split="train")
        cls.heldout_latents = embed_corpus(cls.wae, cls.corpus, samples_per_seq=5, seed=1, split="heldout")
        cls.clf, cls.clf_report = fit_latent_classifier(
            cls.train_latents.Z,
            cls.train_latents.labels["AMP"],
            "AMP",
            heldout=(cls.heldout_latents.Z, cls.heldout_latents.labels["AMP"]),
        )
        cls.gmm, _ = fit_gmm(cls.train_latents.Z, 8, seed=0)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_planted_fraction(self):
        rate = np.mean([oracle(s) for s in self.corpus.sequences("train")])
        self.assertGreater(rate, 0.1)
        self.assertLess(rate, 0.3)

    def test_heldout_reconstruction(self):
        heldout = [s for s in self.corpus.sequences("heldout") if len(s) <= 10]
        recons = self.wae.reconstruct(heldout)
        self.assertGreaterEqual(np.mean([a == b for a, b in zip(heldout, recons)]), 0.85)

    def test_latent_classifier_accuracy(self):
        self.assertGreaterEqual(self.clf_report["heldout_accuracy"], 0.85)
        self.assertGreater(self.clf_report["heldout_accuracy"], self.clf_report["majority_baseline"])

    def test_conditioned_sampling_enriches_attribute(self):
        classifiers = OrderedDict([("AMP", self.clf)])
        res = parallel_class_sample(self.gmm, classifiers, AttributeTarget.parse("amp=1"), SAMPLE_COUNT, 10 ** 6, seed=0, streams=4)
        conditioned = decode_latents(self.wae, res.Z, threads=4)
        Z, _ = self.gmm.sample(SAMPLE_COUNT, np.random.default_rng(0))
        unconditioned = decode_latents(self.wae, Z, threads=4)
        conditioned_rate = np.mean([oracle(s) for s in conditioned])
        unconditioned_rate = np.mean([oracle(s) for s in unconditioned])
        self.assertEqual(len(conditioned), SAMPLE_COUNT)
        self.assertGreater(unconditioned_rate, 0.0)
        self.assertGreaterEqual(conditioned_rate, 3 * unconditioned_rate)

    def test_wae_beats_collapsed_vae(self):
        heldout = self.corpus.sequences("heldout")
        wae_eval = evaluate(self.wae, heldout)
        vae_eval = evaluate(self.vae, heldout)
        self.assertLess(vae_eval["kl_per_dim"], 0.01)
        self.assertGreater(wae_eval["bleu"], vae_eval["bleu"])


if __name__ == "__main__":
    unittest.main()
