# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
import os
import json
import tempfile
import unittest
from collections import OrderedDict

# Third party imports
import numpy as np
from scipy import integrate, optimize, stats
from scipy.special import expit
from scipy.stats import norm

# Local imports
from pepCLaSS.common import ConfigError, DataError, ModelError, UnrealizableAttributeCombination, provenance, read_provenance
from pepCLaSS.models.latent_models import MixtureDensity, LatentClassifier
from pepCLaSS.class_sampler import (
    AttributeTarget,
    Candidate,
    Candidate_Writer,
    acceptance_prob,
    class_sample,
    parallel_class_sample,
    generate_candidates,
    unconditioned_candidates,
    decode_latents,
    read_candidates,
    _split,
)


class FakeConfig:
    max_seq_length = 25


class FakeDecoder:
    """Maps the first latent coordinate to one of three decodes, one of them invalid"""

    config = FakeConfig()

    def decode_beam(self, z, beam_size=None):
        if z[0] > 1.5:
            return ""
        return "KLWKLW" if z[0] > 0 else "GLFDIV"


def standard_gmm(dim=1):
    return MixtureDensity([1.0], [np.zeros(dim)], [np.ones(dim)])


def classifiers(**kwargs):
    return OrderedDict((a, LatentClassifier(a, w, b)) for a, (w, b) in kwargs.items())


class TestAttributeTarget(unittest.TestCase):
    def test_parse(self):
        target = AttributeTarget.parse("amp=1, toxic=0")
        self.assertEqual(list(target), [("AMP", 1), ("Toxic", 0)])
        self.assertEqual(repr(target), "AMP=1,Toxic=0")
        self.assertEqual(list(AttributeTarget.parse(["broad=1"])), [("BroadSpectrum", 1)])

    def test_invalid(self):
        for text in ("amp", "amp=2", "amp=yes", "amp=1,AMP=0", ""):
            with self.assertRaises(ConfigError, msg=text):
                AttributeTarget.parse(text)

    def test_check(self):
        target = AttributeTarget.parse("amp=1,toxic=0")
        with self.assertRaises(ModelError):
            target.check(classifiers(AMP=([1.0], 0.0)))


class TestRejectionSampling(unittest.TestCase):
    def test_acceptance_prob_is_product(self):
        clfs = classifiers(AMP=([1.0, 0.0], 0.0), Toxic=([0.0, 2.0], -1.0))
        Z = np.array([[0.5, 0.2], [-1.0, 3.0]])
        target = AttributeTarget.parse("amp=1,toxic=0")
        expected = expit(Z[:, 0]) * (1 - expit(2 * Z[:, 1] - 1))
        np.testing.assert_allclose(acceptance_prob(Z, clfs, target), expected)

    def test_constant_acceptance(self):
        target = AttributeTarget.parse("amp=1")
        res = class_sample(standard_gmm(), classifiers(AMP=([0.0], 0.0)), target, 2000, 100000, np.random.default_rng(0), chunk_size=512)
        self.assertEqual(len(res.Z), 2000)
        self.assertTrue(np.allclose(res.accept_probs, 0.5))
        self.assertAlmostEqual(res.acceptance_rate, 0.5, delta=0.02)
        self.assertTrue((np.diff(res.draw_index) > 0).all())
        self.assertEqual(res.attempts, res.draw_index[-1] + 1)

    def tilted_bin_edges(self, slope, bins=20):
        """Equiprobable bin edges of the density proportional to N(t; 0, 1) * sigmoid(slope * t), and its mass"""

        def tilted(t):
            return norm.pdf(t) * expit(slope * t)

        mass, _ = integrate.quad(tilted, -np.inf, np.inf)

        def cdf(x):
            return integrate.quad(tilted, -np.inf, x)[0] / mass

        inner = [optimize.brentq(lambda x: cdf(x) - k / bins, -10, 10) for k in range(1, bins)]
        return [-50.0] + inner + [50.0], mass

    def assert_acceptance_rate(self, res, mass):
        sd = np.sqrt(mass * (1 - mass) / res.attempts)
        self.assertLess(abs(res.acceptance_rate - mass), 3 * sd)

    def test_accepted_points_follow_tilted_density(self):
        # Accepted z have density proportional to N(z; 0, 1) * sigmoid(4z)
        target = AttributeTarget.parse("amp=1")
        clfs = classifiers(AMP=([4.0], 0.0))
        edges, mass = self.tilted_bin_edges(4.0)
        self.assertAlmostEqual(mass, 0.5, places=6)
        for seed in range(5):
            res = class_sample(standard_gmm(), clfs, target, 4000, 10 ** 6, np.random.default_rng(seed))
            observed, _ = np.histogram(res.Z[:, 0], bins=edges)
            self.assertEqual(observed.sum(), 4000)
            self.assertGreater(stats.chisquare(observed).pvalue, 0.01, msg="seed {}".format(seed))
            self.assert_acceptance_rate(res, mass)

    def test_accepted_points_follow_tilted_density_2d(self):
        # Along w the accepted density is N(t; 0, 1) * sigmoid(|w| t), across w it stays N(0, 1)
        w = np.array([2.0, -1.0])
        target = AttributeTarget.parse("amp=1")
        clfs = classifiers(AMP=(w, 0.0))
        u = w / np.linalg.norm(w)
        across = np.array([u[1], -u[0]])
        edges, mass = self.tilted_bin_edges(np.linalg.norm(w))
        normal_edges = [-50.0] + list(norm.ppf(np.arange(1, 20) / 20)) + [50.0]
        for seed in range(5):
            res = class_sample(standard_gmm(2), clfs, target, 4000, 10 ** 6, np.random.default_rng(seed))
            along_counts, _ = np.histogram(res.Z @ u, bins=edges)
            across_counts, _ = np.histogram(res.Z @ across, bins=normal_edges)
            self.assertGreater(stats.chisquare(along_counts).pvalue, 0.01, msg="seed {}".format(seed))
            self.assertGreater(stats.chisquare(across_counts).pvalue, 0.01, msg="seed {}".format(seed))
            self.assert_acceptance_rate(res, mass)

    def test_max_attempts(self):
        target = AttributeTarget.parse("amp=1")
        res = class_sample(standard_gmm(), classifiers(AMP=([0.0], 0.0)), target, 10 ** 6, 300, np.random.default_rng(0))
        self.assertEqual(res.attempts, 300)
        self.assertLess(len(res.Z), 300)

    def test_unrealizable(self):
        target = AttributeTarget.parse("amp=1")
        clfs = classifiers(AMP=([0.0], -60.0))
        with self.assertRaises(UnrealizableAttributeCombination):
            class_sample(standard_gmm(), clfs, target, 5, 1000, np.random.default_rng(0))
        res = class_sample(standard_gmm(), clfs, target, 5, 1000, np.random.default_rng(0), raise_on_empty=False)
        self.assertEqual(len(res.Z), 0)
        self.assertEqual(res.acceptance_rate, 0.0)
        with self.assertRaises(UnrealizableAttributeCombination):
            parallel_class_sample(standard_gmm(), clfs, target, 5, 1000, streams=2)

    def test_bad_quota(self):
        with self.assertRaises(ConfigError):
            class_sample(standard_gmm(), classifiers(AMP=([0.0], 0.0)), AttributeTarget.parse("amp=1"), 0, 10, np.random.default_rng(0))

    def test_split(self):
        self.assertEqual(_split(10, 3), [4, 3, 3])
        self.assertEqual(sum(_split(7, 7)), 7)

    def test_parallel_independent_of_workers(self):
        gmm = MixtureDensity([0.3, 0.7], [[-2.0, 0.0], [2.0, 1.0]], [[1.0, 1.0], [0.5, 0.5]])
        clfs = classifiers(AMP=([1.0, -0.5], 0.2))
        target = AttributeTarget.parse("amp=1")
        a = parallel_class_sample(gmm, clfs, target, 300, 10 ** 5, seed=4, streams=4, threads=1)
        b = parallel_class_sample(gmm, clfs, target, 300, 10 ** 5, seed=4, streams=4, threads=2)
        np.testing.assert_array_equal(a.Z, b.Z)
        np.testing.assert_array_equal(a.stream_id, b.stream_id)
        self.assertEqual(a.attempts, b.attempts)
        self.assertEqual(len(a.Z), 300)
        self.assertEqual(list(np.unique(a.stream_id)), [0, 1, 2, 3])
        self.assertTrue((np.diff(a.stream_id) >= 0).all())


class TestCandidates(unittest.TestCase):
    def test_candidate(self):
        cand = Candidate("c1", "KLW", [3.0, 4.0], 0.2)
        self.assertEqual(cand.z_norm, 5.0)
        self.assertTrue(cand.passed)
        cand.add_verdict("AMP", 0.9, True)
        cand.add_verdict("Toxic", 0.8, False)
        self.assertFalse(cand.passed)
        with self.assertRaises(ModelError):
            cand.add_verdict("AMP", 0.1, True)
        with self.assertRaises(ModelError):
            Candidate("c2", "KLW", [0.0], 0.0)

    def test_decode_latents_in_order(self):
        Z = np.array([[1.0], [-1.0], [2.0]])
        self.assertEqual(decode_latents(FakeDecoder(), Z), ["KLWKLW", "GLFDIV", ""])

    def test_generate_candidates(self):
        clfs = classifiers(AMP=([0.0], 0.0))
        target = AttributeTarget.parse("amp=1")
        candidates, stats = generate_candidates(FakeDecoder(), standard_gmm(), clfs, target, 200, seed=1, training=["GLFDIV"], streams=2)
        self.assertEqual(len({c.id for c in candidates}), len(candidates))
        self.assertEqual(stats["Accepted latent points"], 200)
        self.assertGreater(stats["Invalid decodes"], 0)
        self.assertEqual(stats["Unique candidates"], 2)
        self.assertEqual(stats["Invalid decodes"] + stats["Duplicate decodes"] + stats["Unique candidates"], 200)
        novel = {c.sequence: c.novel for c in candidates}
        self.assertEqual(novel, {"KLWKLW": True, "GLFDIV": False})
        self.assertEqual(stats["Not novel"], 1)
        self.assertTrue(all(c.id.startswith("class_") for c in candidates))
        self.assertAlmostEqual(candidates[0].class_probs["AMP"], 0.5)

    def test_unconditioned(self):
        candidates, stats = unconditioned_candidates(FakeDecoder(), standard_gmm(), 50, seed=0)
        self.assertEqual(stats["Latent samples"], 50)
        self.assertTrue(all(c.accept_prob == 1.0 for c in candidates))
        self.assertTrue(all(c.id.startswith("gmm_") for c in candidates))


class TestCandidateIO(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = self.tmp.name
        self.prov = provenance("ab" * 8, 3)
        self.cands = [
            Candidate("class_000000", "KLWKLW", [1.0, 0.0], 0.75, class_probs=OrderedDict([("AMP", 0.75)])),
            Candidate("class_000001", "NA", [0.0, 2.0], 1.5e-9, novel=False, class_probs=OrderedDict([("AMP", 0.1)])),
        ]

    def tearDown(self):
        self.tmp.cleanup()

    def write(self):
        fa = os.path.join(self.dir, "out", "cands.fa")
        csv = os.path.join(self.dir, "out", "cands.csv")
        with Candidate_Writer(fa, csv, attributes=["AMP"], prov=self.prov) as writer:
            writer.stats["Acceptance rate"] = 0.5
            for c in self.cands:
                writer.write(c)
        return fa, csv

    def test_fasta_round_trip(self):
        fa, _ = self.write()
        back = read_candidates(fa)
        self.assertEqual([c.id for c in back], ["class_000000", "class_000001"])
        self.assertEqual([c.sequence for c in back], ["KLWKLW", "NA"])
        self.assertEqual([c.novel for c in back], [True, False])
        self.assertAlmostEqual(back[1].accept_prob, 1.5e-9)
        with open(fa + ".json") as fp:
            sidecar = json.load(fp)
        self.assertEqual(sidecar["sequences"], 2)
        self.assertEqual(sidecar["Acceptance rate"], 0.5)
        self.assertEqual(read_provenance(fa)["config_hash"], "ab" * 8)

    def test_rewrite_after_read(self):
        fa, _ = self.write()
        self.assertEqual(len(read_candidates(fa)), 2)
        self.cands = self.cands[1:]
        self.write()
        self.assertEqual([c.sequence for c in read_candidates(fa)], ["NA"])

    def test_csv_round_trip(self):
        _, csv = self.write()
        self.assertEqual(read_provenance(csv)["config_hash"], "ab" * 8)
        back = read_candidates(csv)
        self.assertEqual([c.sequence for c in back], ["KLWKLW", "NA"])
        self.assertEqual([c.novel for c in back], [True, False])
        self.assertAlmostEqual(back[0].accept_prob, 0.75)

    def test_plain_fasta(self):
        fn = os.path.join(self.dir, "plain.fa")
        with open(fn, "w") as fp:
            fp.write(">p1\nGLFDIV\n>p2\nKWK\n")
        back = read_candidates(fn)
        self.assertEqual([(c.id, c.accept_prob, c.novel) for c in back], [("p1", 1.0, True), ("p2", 1.0, True)])

    def test_wrapped_fasta_with_descriptions(self):
        fn = os.path.join(self.dir, "wrapped.fa")
        with open(fn, "w") as fp:
            fp.write(">class_000007|0.25|not_novel sampled at step 3\nKLWK\nLWKL\nW\n>p2 free text\nGLFD\nIV\n")
        back = read_candidates(fn)
        self.assertEqual([c.id for c in back], ["class_000007", "p2"])
        self.assertEqual([c.sequence for c in back], ["KLWKLWKLW", "GLFDIV"])
        self.assertEqual([(c.accept_prob, c.novel) for c in back], [(0.25, False), (1.0, True)])

    def test_malformed_fasta(self):
        fn = os.path.join(self.dir, "ragged.fa")
        with open(fn, "w") as fp:
            fp.write(">a\nKLWK\nLW\nKLWK\n")
        with self.assertRaises(DataError):
            read_candidates(fn)

    def test_abort_removes_outputs(self):
        fa = os.path.join(self.dir, "cands.fa")
        csv = os.path.join(self.dir, "cands.csv")
        writer = Candidate_Writer(fa, csv, attributes=["AMP"], prov=self.prov)
        writer.write(self.cands[0])
        writer.abort()
        self.assertFalse(os.path.exists(fa))
        self.assertFalse(os.path.exists(csv))
        self.assertFalse(os.path.exists(fa + ".json"))


if __name__ == "__main__":
    unittest.main()
