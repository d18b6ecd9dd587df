# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
import os
import tempfile
import unittest

# Third party imports
import numpy as np
import pandas as pd

# Local imports
from pepCLaSS.common import ConfigError, DataError, ModelError, MalformedRowError, provenance, read_provenance
from pepCLaSS.class_sampler import Candidate
from pepCLaSS.screening import (
    ScreenConfig,
    ContactSeries,
    ContactStats,
    NotBound,
    parse_directions,
    calibrate_thresholds,
    screen_pipeline,
    attrition,
    write_verdicts,
    binding_frame,
    contact_stats,
    simscreen_filter,
    variance_rule_confusion,
    load_contact_series,
    load_contact_manifest,
)

# sequence, binding time (ns), mean and variance of contacts after binding
CONTACT_TABLE = [
    ("YLRLIRYMAKMI", 210, 6.45, 1.27),
    ("FPLTWLKWWKWKK", 90, 5.90, 1.39),
    ("HILRMRIRQMMT", 17, 7.84, 1.44),
    ("ILLHAILGVRKKL", 105, 7.16, 1.19),
    ("YRAAMLRRQYMMT", 19, 8.79, 1.25),
    ("HIRLMRIRQMMT", 493, 8.38, 1.50),
    ("HIRAMRIRAQMMT", 39, 7.20, 1.39),
    ("KTLAQLSAGVKRWH", 177, 7.62, 1.46),
    ("HILRMRIRQGMMT", 62, 8.37, 1.53),
    ("HRAIMLRIRQMMT", 297, 7.46, 1.35),
    ("EYLIEVRESAKMTQ", 150, 6.65, 1.79),
    ("GLITMLKVGLAKVQ", 341, 8.34, 1.58),
    ("YQLLRIMRINIA", 239, 6.29, 1.71),
    ("VRWIEYWREKWRT", 125, 6.41, 1.28),
    ("LIQVAPLGRLLKRR", 37, 6.52, 1.24),
    ("YQLRLIMKYAI", 192, 7.75, 1.86),
    ("HRALMRIRQCMT", 80, 9.15, 1.27),
    ("GWLPTEKWRKLC", 227, 6.11, 1.63),
    ("YQLRLMRIMSRI", 349, 8.28, 1.80),
    ("LRPAFKVSK", 151, 7.73, 1.85),
]


def synthetic_series(seq_id, binding_ns, mean, var, frames=800):
    """1 ns frames: no contact before binding, then contacts alternating around the mean"""
    s = np.sqrt(var)
    post = np.where(np.arange(frames) % 2 == 0, mean + s, mean - s)
    contacts = np.concatenate([np.zeros(binding_ns), post])
    return ContactSeries(seq_id, np.arange(len(contacts), dtype=np.float64), contacts)


class StubClassifier:
    def __init__(self, scores):
        self.scores = scores

    def logit_batch(self, sequences):
        return np.array([self.scores[s] for s in sequences], dtype=np.float64)


class StubLM:
    def __init__(self, ppl):
        self.ppl = ppl

    def perplexity_batch(self, sequences):
        return np.array([self.ppl[s] for s in sequences], dtype=np.float64)


class TestScreenConfig(unittest.TestCase):
    def test_defaults(self):
        config = ScreenConfig()
        self.assertEqual(config.stages, ["amp", "toxic", "broad", "struct", "ppl"])
        self.assertTrue(config.passes("amp", 7.944))
        self.assertFalse(config.passes("toxic", -1.573))
        self.assertTrue(config.passes("ppl", 16.04))
        self.assertFalse(config.passes("ppl", 16.05))

    def test_directions(self):
        directions = parse_directions("toxic>=")
        self.assertEqual(directions["toxic"], ">=")
        self.assertEqual(directions["amp"], ">=")
        self.assertTrue(ScreenConfig(directions="toxic>=").passes("toxic", 0.0))
        for text in ("toxic", "sweet>=", "amp=="):
            with self.assertRaises(ConfigError, msg=text):
                parse_directions(text)

    def test_validation(self):
        with self.assertRaises(ConfigError):
            ScreenConfig(stages="amp,solubility")
        with self.assertRaises(ConfigError):
            ScreenConfig(contact_var_max=0)
        with self.assertRaises(ConfigError):
            ScreenConfig(amp_logit=float("nan"))
        self.assertEqual(ScreenConfig(stages="AMP, ppl").stages, ["amp", "ppl"])

    def test_dict_round_trip(self):
        config = ScreenConfig(amp_logit=1.5, directions="toxic<=", stages=["amp", "toxic"])
        back = ScreenConfig.from_dict(config.to_dict())
        self.assertEqual(back.to_dict(), config.to_dict())

    def test_calibration(self):
        seqs = ["A", "B", "C", "D", "E"]
        clfs = {"AMP": StubClassifier(dict(zip(seqs, [1.0, 2.0, 3.0, 4.0, 5.0])))}
        lm = StubLM(dict(zip(seqs, [10.0, 20.0, 30.0, 40.0, 50.0])))
        config = calibrate_thresholds(clfs, lm, seqs, ScreenConfig(toxic_logit=-3.0))
        self.assertEqual(config.amp_logit, 3.0)
        self.assertEqual(config.ppl_max, 20.0)
        self.assertEqual(config.toxic_logit, -3.0)
        with self.assertRaises(DataError):
            calibrate_thresholds(clfs, None, [])


class TestScreenPipeline(unittest.TestCase):
    def setUp(self):
        self.seqs = ["KLWK", "GLFD", "FFKK", "WWRR", "KKKK"]
        self.classifiers = {
            "AMP": StubClassifier(dict(zip(self.seqs, [9.0, 1.0, 8.0, 8.5, 9.5]))),
            "Toxic": StubClassifier(dict(zip(self.seqs, [-2.0, -5.0, 0.0, -3.0, -4.0]))),
        }
        self.lm = StubLM(dict(zip(self.seqs, [10.0, 12.0, 11.0, 20.0, 15.0])))
        self.config = ScreenConfig(stages="amp,toxic,ppl")

    def candidates(self):
        return [Candidate("c{}".format(i), s, [0.0], 0.5, novel=(s != "KKKK")) for i, s in enumerate(self.seqs)]

    def test_stage_report(self):
        cands = self.candidates()
        survivors, report = screen_pipeline(cands, self.classifiers, self.lm, self.config)
        self.assertEqual([c.sequence for c in survivors], ["KLWK"])
        self.assertEqual(report["input"], {"candidates": 5, "not_novel_excluded": 1})
        self.assertEqual(report["amp"], {"evaluated": 4, "passed": 3})
        self.assertEqual(report["toxic"], {"evaluated": 3, "passed": 2})
        self.assertEqual(report["ppl"], {"evaluated": 2, "passed": 1})
        # Failed candidates still carry every stage score
        self.assertEqual(list(cands[1].verdicts), ["amp", "toxic", "ppl"])
        self.assertEqual(cands[4].verdicts, {})

    def test_include_not_novel(self):
        survivors, report = screen_pipeline(self.candidates(), self.classifiers, self.lm, self.config, include_not_novel=True)
        self.assertEqual(sorted(c.sequence for c in survivors), ["KKKK", "KLWK"])
        self.assertEqual(report["input"]["not_novel_excluded"], 0)

    def test_attrition_any_order(self):
        cands = [c for c in self.candidates() if c.novel]
        screen_pipeline(cands, self.classifiers, self.lm, self.config)
        self.assertEqual(list(attrition(cands, ["ppl", "toxic", "amp"]).values()), [3, 2, 1])
        self.assertEqual(attrition(cands, ["amp", "toxic", "ppl"])["ppl"], attrition(cands, ["ppl", "amp", "toxic"])["toxic"])

    def test_missing_models(self):
        with self.assertRaises(ModelError):
            screen_pipeline(self.candidates(), self.classifiers, None, self.config)
        with self.assertRaises(ModelError):
            screen_pipeline(self.candidates(), {}, self.lm, self.config)

    def test_empty(self):
        survivors, report = screen_pipeline([], self.classifiers, self.lm, self.config)
        self.assertEqual(survivors, [])
        self.assertEqual(report["amp"], {"evaluated": 0, "passed": 0})

    def test_write_verdicts(self):
        cands = self.candidates()
        screen_pipeline(cands, self.classifiers, self.lm, self.config)
        prov = provenance("cd" * 8, 0)
        with tempfile.TemporaryDirectory() as d:
            fn = os.path.join(d, "screen", "verdicts.csv")
            write_verdicts(fn, cands, self.config.stages, prov=prov)
            self.assertEqual(read_provenance(fn)["config_hash"], "cd" * 8)
            df = pd.read_csv(fn, comment="#", dtype={"sequence": str}, keep_default_na=False, na_values=[""])
        self.assertEqual(list(df.columns), ["id", "sequence", "accept_prob", "novel", "amp_score", "amp_pass", "toxic_score", "toxic_pass", "ppl_score", "ppl_pass", "passed"])
        self.assertEqual(list(df["passed"]), [1, 0, 0, 0, 0])
        self.assertEqual(df.loc[2, "toxic_score"], 0.0)
        self.assertTrue(np.isnan(df.loc[4, "amp_score"]))


class TestContactScreen(unittest.TestCase):
    def test_reference_table(self):
        for seq, binding, mean, var in CONTACT_TABLE:
            stats = contact_stats(synthetic_series(seq, binding, mean, var))
            self.assertIsInstance(stats, ContactStats)
            self.assertEqual(stats.binding_time_ns, binding, seq)
            self.assertAlmostEqual(stats.mean_contacts, mean, places=9)
            self.assertAlmostEqual(stats.var_contacts, var, places=9)
            self.assertEqual(simscreen_filter(stats), (True, None), seq)

    def test_filter_reasons(self):
        config = ScreenConfig()
        cases = [
            (NotBound("x", 10), "not_bound"),
            (ContactStats("x", 500.0, 7.0, 1.0), "binding_time"),
            (ContactStats("x", 100.0, 4.9, 1.0), "mean_contacts"),
            (ContactStats("x", 100.0, 7.0, 2.01), "var_contacts"),
        ]
        for stats, reason in cases:
            self.assertEqual(simscreen_filter(stats, config), (False, reason))
        self.assertTrue(simscreen_filter(ContactStats("x", 100.0, 7.0, 2.0), config)[0])

    def test_binding_frame(self):
        self.assertIsNone(binding_frame([0, 0, 0]))
        self.assertEqual(binding_frame([0, 1, 1, 1]), 1)
        # A transient contact followed by a long gap is not binding
        contacts = [1, 0, 0, 0, 0] + [2] * 20 + [0]
        self.assertEqual(binding_frame(contacts, gap_tolerance=0.05), 5)
        self.assertEqual(binding_frame(contacts, gap_tolerance=0.2), 0)
        self.assertIsInstance(contact_stats(ContactSeries("x", [1.0, 2.0], [0.0, 0.0])), NotBound)

    def test_series_validation(self):
        with self.assertRaises(DataError):
            ContactSeries("x", [1.0, 1.0], [1.0, 1.0])
        with self.assertRaises(DataError):
            ContactSeries("x", [1.0, 2.0], [1.0, -1.0])
        with self.assertRaises(DataError):
            ContactSeries("x", [], [])

    def test_confusion(self):
        stats = [
            ContactStats("a", 10.0, 7.0, 1.0),
            ContactStats("b", 10.0, 7.0, 3.0),
            ContactStats("c", 10.0, 7.0, 1.5),
            ContactStats("d", 600.0, 7.0, 2.5),
            NotBound("e", 100),
        ]
        labels = [1, 1, 0, 0, 0]
        d = variance_rule_confusion(stats, labels)
        self.assertEqual((d["tp"], d["fp"], d["tn"], d["fn"]), (1, 1, 2, 1))
        self.assertEqual(d["sensitivity"], 0.5)
        self.assertAlmostEqual(d["specificity"], 2 / 3)
        full = variance_rule_confusion(stats[:1], [1], full_rule=True)
        self.assertIsNone(full["specificity"])

    def test_load_files(self):
        with tempfile.TemporaryDirectory() as d:
            series = synthetic_series("p1", 5, 6.0, 1.0, frames=10)
            pd.DataFrame({"time_ns": series.times, "contacts": series.contacts}).to_csv(os.path.join(d, "p1.csv"), index=False)
            with open(os.path.join(d, "bad.csv"), "w") as fp:
                fp.write("time_ns,contacts\n0,1\n1,abc\n")
            with open(os.path.join(d, "manifest.csv"), "w") as fp:
                fp.write("sequence_id,path\np1,p1.csv\n")

            manifest = load_contact_manifest(os.path.join(d, "manifest.csv"))
            self.assertEqual(manifest, [("p1", os.path.join(d, "p1.csv"))])
            loaded = load_contact_series(manifest[0][1], "p1")
            self.assertEqual(contact_stats(loaded).binding_time_ns, 5.0)
            with self.assertRaises(MalformedRowError) as cm:
                load_contact_series(os.path.join(d, "bad.csv"))
            self.assertEqual(cm.exception.row_index, 2)
            with self.assertRaises(DataError):
                load_contact_series(os.path.join(d, "missing.csv"))


if __name__ == "__main__":
    unittest.main()
