# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
import io
import os
import json
import tempfile
import unittest
from unittest import mock

# Third party imports
import numpy as np
import pandas as pd

# Local imports
from pepCLaSS.__main__ import main
from pepCLaSS.common import read_provenance
from pepCLaSS.class_sampler import read_candidates
from pepCLaSS.models.autoencoder import AeConfig, SequenceAutoencoder
from pepCLaSS.models.latent_models import MixtureDensity, load_classifiers
from pepCLaSS.models.langmodel import LmConfig, CharLanguageModel
from pepCLaSS.models.seq_classifier import SeqClfConfig, SequenceClassifier

N_SAMPLES = 12


class TestGenerationRun(unittest.TestCase):
    """Whole generation run through the command line, with small untrained networks"""

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir = os.path.join(cls.tmp.name, "run")
        cls.run_pipeline(cls.dir)

    @classmethod
    def run_pipeline(cls, directory):
        def fn(name):
            return os.path.join(directory, name)

        os.makedirs(directory)
        rng = np.random.default_rng(0)
        seqs = sorted({"".join(rng.choice(list("KLRWGFDAEIV"), rng.integers(5, 13))) for _ in range(80)})
        with open(fn("seqs.csv"), "w") as fp:
            fp.write("id,sequence\n")
            for i, s in enumerate(seqs):
                fp.write("s{},{}\n".format(i, s))
        with open(fn("labels.csv"), "w") as fp:
            fp.write("sequence,attribute,value\n")
            for i, s in enumerate(seqs):
                fp.write("{},AMP,{}\n".format(s, i % 2))

        ae_config = AeConfig(embedding_size=4, hidden_size=6, latent_dim=3, max_seq_length=12, beam_size=1, mmd_feature_count=64)
        SequenceAutoencoder(ae_config).save(fn("ae.clsg"))
        SequenceClassifier("AMP", SeqClfConfig(hidden_size=5, embedding_size=4)).save(fn("amp.clsg"))
        CharLanguageModel(LmConfig(hidden_size=6, embedding_size=4)).save(fn("lm.clsg"))

        cls.run_cli(["ingest", "-i", fn("seqs.csv"), "-l", fn("labels.csv"), "-o", fn("corpus.tsv"), "--max_seq_length", "12", "--split_ratios", "0.5", "0.5", "0.0"])
        cls.run_cli(["embed", "-m", fn("ae.clsg"), "-i", fn("corpus.tsv"), "-o", fn("latents_{split}.clsg"), "--samples_per_seq", "3"])
        cls.run_cli(["fit-gmm", "-i", fn("latents_train.clsg"), "--heldout_fn", fn("latents_heldout.clsg"), "-o", fn("gmm.clsg"), "--components", "1"])
        cls.run_cli(["fit-latent-clf", "-i", fn("latents_train.clsg"), "--heldout_fn", fn("latents_heldout.clsg"), "-o", fn("latent_clf.clsg"), "--attributes", "AMP"])
        cls.run_cli(
            [
                "class-sample", "-m", fn("ae.clsg"), "--gmm_fn", fn("gmm.clsg"), "--clf_fn", fn("latent_clf.clsg"),
                "--corpus_fn", fn("corpus.tsv"), "-o", fn("cands.fa"), "--output_csv_fn", fn("cands.csv"),
                "--target", "amp=1", "--n", str(N_SAMPLES), "--max_attempts", "100000", "--beam_size", "1", "--streams", "2",
            ]
        )
        cls.run_cli(cls.screen_args(directory) + ["-o", fn("screen")])
        cls.run_cli(["align", "-i", fn("cands.fa"), "--corpus_fn", fn("corpus.tsv"), "-o", fn("novelty.csv")])
        cls.run_cli(["report", "-i", fn("cands.fa"), "--screen_dir", fn("screen"), "--novelty_fn", fn("novelty.csv"), "--corpus_fn", fn("corpus.tsv"), "-o", fn("report")])

    @staticmethod
    def screen_args(directory):
        def fn(name):
            return os.path.join(directory, name)

        return [
            "screen", "-i", fn("cands.fa"), "--clf_fns", fn("amp.clsg"), "--lm_fn", fn("lm.clsg"),
            "--stages", "amp", "ppl", "--amp_logit=-1000", "--ppl_max", "1e9",
        ]

    @classmethod
    def fn(cls, name):
        return os.path.join(cls.dir, name)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    @staticmethod
    def run_cli(args):
        main(args + ["-q"])

    def test_latent_models(self):
        gmm = MixtureDensity.load(self.fn("gmm.clsg"))
        self.assertEqual(gmm.component_count, 1)
        self.assertEqual(gmm.dim, 3)
        classifiers, _ = load_classifiers(self.fn("latent_clf.clsg"))
        self.assertEqual(list(classifiers), ["AMP"])

    def test_candidates(self):
        with open(self.fn("cands.fa.json")) as fp:
            sidecar = json.load(fp)
        self.assertEqual(sidecar["Accepted latent points"], N_SAMPLES)
        candidates = read_candidates(self.fn("cands.fa"))
        self.assertGreater(len(candidates), 0)
        self.assertEqual(sidecar["sequences"], len(candidates))
        self.assertTrue(all(0 < c.accept_prob <= 1 for c in candidates))
        self.assertEqual([c.sequence for c in read_candidates(self.fn("cands.csv"))], [c.sequence for c in candidates])
        self.assertEqual(read_provenance(self.fn("cands.fa"))["config_hash"], read_provenance(self.fn("corpus.tsv"))["config_hash"])

    def test_screening(self):
        candidates = read_candidates(self.fn("cands.fa"))
        verdicts = pd.read_csv(self.fn("screen/verdicts.csv"), comment="#")
        self.assertEqual(len(verdicts), sum(c.novel for c in candidates))
        self.assertTrue((verdicts["passed"] == 1).all())
        self.assertEqual(list(verdicts.columns[-5:]), ["amp_score", "amp_pass", "ppl_score", "ppl_pass", "passed"])
        self.assertEqual(len(read_candidates(self.fn("screen/survivors.fa"))), len(verdicts))
        with open(self.fn("screen/screen_report.json")) as fp:
            report = json.load(fp)["report"]
        self.assertEqual(list(report), ["input", "amp", "ppl"])
        self.assertEqual(report["ppl"]["passed"], len(verdicts))

    def test_novelty(self):
        novelty = pd.read_csv(self.fn("novelty.csv"), dtype={"id": str}, comment="#")
        self.assertEqual(list(novelty["id"]), [c.id for c in read_candidates(self.fn("cands.fa"))])
        self.assertTrue(((novelty["identity_pct"] >= 0) & (novelty["identity_pct"] <= 100)).all())

    def test_report(self):
        with open(self.fn("report/report.json")) as fp:
            d = json.load(fp)
        funnel = d["funnel"]
        self.assertEqual(list(funnel)[0], "Accepted latent points")
        self.assertEqual(funnel["Accepted latent points"], N_SAMPLES)
        self.assertEqual(list(funnel)[-2:], ["Passed amp", "Passed ppl"])
        self.assertEqual(funnel["Passed ppl"], funnel["Screened (novel)"])
        counts = list(funnel.values())
        self.assertTrue(all(b <= a for a, b in zip(counts, counts[1:])))
        self.assertEqual(d["input_config_hash"], read_provenance(self.fn("cands.fa"))["config_hash"])
        self.assertEqual(len(d["top_candidates"]), min(20, funnel["Passed ppl"]))
        self.assertTrue(os.path.isfile(self.fn("report/top_candidates.tsv")))
        with open(self.fn("report/pepCLaSS_summary_report.html")) as fp:
            self.assertIn("pepCLaSS summary report", fp.read())

    def test_rerun_is_byte_identical(self):
        rerun_dir = os.path.join(self.tmp.name, "rerun")
        self.run_pipeline(rerun_dir)
        artifacts = [
            "corpus.tsv", "latents_train.clsg", "latents_heldout.clsg", "gmm.clsg", "latent_clf.clsg", "cands.fa", "cands.fa.json",
            "cands.csv", "screen/verdicts.csv", "screen/survivors.fa", "novelty.csv", "report/top_candidates.tsv",
        ]
        for name in artifacts:
            with open(self.fn(name), "rb") as first, open(os.path.join(rerun_dir, name), "rb") as second:
                self.assertEqual(first.read(), second.read(), name)

    def test_report_refuses_mixed_configs(self):
        cfg_fn = self.fn("other.cfg")
        with open(cfg_fn, "w") as fp:
            fp.write("ppl_max = 1e9\n")
        self.run_cli(self.screen_args(self.dir) + ["-o", self.fn("screen_other"), "-c", cfg_fn])
        stderr = io.StringIO()
        with mock.patch("sys.stderr", stderr):
            with self.assertRaises(SystemExit) as cm:
                self.run_cli(["report", "-i", self.fn("cands.fa"), "--screen_dir", self.fn("screen_other"), "-o", self.fn("report_other")])
        self.assertEqual(cm.exception.code, 2)
        self.assertEqual(json.loads(stderr.getvalue().strip().splitlines()[-1])["error"], "ConfigError")


class TestSimScreen(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()

    def write_series(self, name, binding_ns, mean, sd, frames=400):
        post = np.where(np.arange(frames) % 2 == 0, mean + sd, mean - sd) if mean else np.zeros(frames)
        contacts = np.concatenate([np.zeros(binding_ns), post])
        fn = os.path.join(self.dir, "{}.csv".format(name))
        pd.DataFrame({"time_ns": np.arange(len(contacts), dtype=float), "contacts": contacts}).to_csv(fn, index=False)
        return os.path.basename(fn)

    def test_simscreen(self):
        manifest_fn = os.path.join(self.dir, "manifest.csv")
        with open(manifest_fn, "w") as fp:
            fp.write("sequence_id,path\n")
            fp.write("stable,{}\n".format(self.write_series("stable", 10, 8.0, 1.0)))
            fp.write("floppy,{}\n".format(self.write_series("floppy", 10, 8.0, 2.0)))
            fp.write("unbound,{}\n".format(self.write_series("unbound", 10, 0.0, 0.0)))
        labels_fn = os.path.join(self.dir, "labels.csv")
        with open(labels_fn, "w") as fp:
            fp.write("sequence_id,active\nstable,1\nfloppy,0\nunbound,0\n")
        out = os.path.join(self.dir, "sim", "verdicts.csv")
        report_fn = os.path.join(self.dir, "sim", "report.json")
        main(["simscreen", "-i", manifest_fn, "--labels_fn", labels_fn, "-o", out, "--report_fn", report_fn, "-q"])

        df = pd.read_csv(out, comment="#", keep_default_na=False)
        self.assertEqual(list(df["passed"]), [1, 0, 0])
        self.assertEqual(list(df["reason"]), ["", "var_contacts", "not_bound"])
        with open(report_fn) as fp:
            summary = json.load(fp)["summary"]
        self.assertEqual(summary["passed"], 1)
        rule = summary["variance_rule"]
        self.assertEqual((rule["tp"], rule["fp"], rule["tn"], rule["fn"]), (1, 0, 2, 0))
        self.assertEqual(rule["sensitivity"], 1.0)


if __name__ == "__main__":
    unittest.main()
