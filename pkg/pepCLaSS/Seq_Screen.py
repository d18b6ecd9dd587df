# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
import os
from collections import OrderedDict, Counter

# Third party imports
import pandas as pd
from tqdm import tqdm

# Local imports
from pepCLaSS.common import *
from pepCLaSS.config import init_command, build_config
from pepCLaSS.corpus import LabeledCorpus, read_sequence_file, canonical_attribute
from pepCLaSS.models.langmodel import CharLanguageModel
from pepCLaSS.models.seq_classifier import SeqClfConfig, SequenceClassifier, train_seq_classifier
from pepCLaSS.class_sampler import Candidate_Writer, read_candidates
from pepCLaSS.screening import (
    ScreenConfig,
    screen_pipeline,
    calibrate_thresholds,
    write_verdicts,
    load_contact_manifest,
    load_contact_series,
    contact_stats,
    simscreen_filter,
    variance_rule_confusion,
    NotBound,
)

# ~~~~~~~~~~~~~~MAIN FUNCTIONS~~~~~~~~~~~~~~#


def Seq_Clf_Train(
    corpus_fn: str,
    attribute: str,
    checkpoint_fn: str,
    log_fn: str = None,
    report_fn: str = None,
    seed: int = 0,
    config_fn: str = None,
    verbose: bool = False,
    quiet: bool = False,
    progress: bool = False,
    **kwargs
):
    """
    Train a bidirectional LSTM classifier predicting a binary attribute from the raw sequence, used by the
    screening stages
    * corpus_fn
        Corpus TSV file written by ingest
    * attribute
        Attribute to predict
    * checkpoint_fn
        Path of the classifier checkpoint
    * log_fn
        Path of the line-delimited JSON training log
    * report_fn
        Path of the JSON accuracy report
    * seed
        Seed of parameters init, dropout and batch order
    * config_fn
        Pipeline config file
    """
    opt, log, prov = init_command(Seq_Clf_Train, locals(), "pepCLaSS_Seq_Clf_Train", config_classes=[SeqClfConfig])
    counter = Counter()
    try:
        config = build_config(SeqClfConfig, opt)
        attribute = canonical_attribute(opt["attribute"])
        corpus = LabeledCorpus.load(opt["corpus_fn"], verbose=opt["verbose"], quiet=opt["quiet"])
        log.warning("Training {} sequence classifier".format(attribute))
        clf, report = train_seq_classifier(
            corpus, attribute, config, checkpoint_fn=opt["checkpoint_fn"], log_fn=opt["log_fn"], prov=prov, progress=opt["progress"], log=log
        )
        counter["Train sequences"] = report["train_size"]
        counter["Evaluation sequences"] = report["eval_size"]
        log_dict(report, log.info, "Classifier report")
        if report["test_accuracy"] is not None and report["test_accuracy"] <= report["majority_baseline"]:
            log.info("Test accuracy does not beat the majority class baseline")
        if opt["report_fn"]:
            write_json(opt["report_fn"], report, prov=prov)
    finally:
        log_dict(counter, log.info, "Results summary")
    return clf


def Seq_Screen(
    candidates_fn: str,
    clf_fns: [str],
    output_dir: str,
    lm_fn: str = None,
    calibration_fn: str = None,
    include_not_novel: bool = False,
    seed: int = 0,
    config_fn: str = None,
    verbose: bool = False,
    quiet: bool = False,
    progress: bool = False,
    **kwargs
):
    """
    Apply the screening stages (AMP, toxicity, broad-spectrum, structure classifiers then language model
    perplexity) to generated candidates. Writes the per-candidate verdicts, the attrition report and the
    surviving candidates
    * candidates_fn
        Candidates FASTA or CSV file written by class-sample
    * clf_fns
        Sequence classifier checkpoints, one per screened attribute
    * output_dir
        Directory of verdicts.csv, screen_report.json and survivors.fa
    * lm_fn
        Language model checkpoint (required by the ppl stage)
    * calibration_fn
        Reference sequences (e.g. prior decodes). When given, thresholds are recalibrated on them
    * include_not_novel
        Also screen candidates identical to a training sequence
    * seed
        Recorded in the output provenance
    * config_fn
        Pipeline config file
    """
    opt, log, prov = init_command(Seq_Screen, locals(), "pepCLaSS_Screen", config_classes=[ScreenConfig])
    counter = Counter()
    try:
        config = build_config(ScreenConfig, opt)
        log.warning("Loading models and candidates")
        classifiers = OrderedDict()
        for fn in opt["clf_fns"]:
            clf = SequenceClassifier.load(fn)
            classifiers[clf.attribute] = clf
        lm = CharLanguageModel.load(opt["lm_fn"]) if opt["lm_fn"] else None
        candidates = read_candidates(opt["candidates_fn"])
        counter["Candidates"] = len(candidates)

        if opt["calibration_fn"]:
            log.warning("Calibrating thresholds")
            reference = [s for _, s in read_sequence_file(opt["calibration_fn"])]
            config = calibrate_thresholds(classifiers, lm, reference, config)
        log_dict(config.to_dict(), log.debug, "Screening thresholds")

        log.warning("Screening candidates")
        survivors, report = screen_pipeline(candidates, classifiers, lm, config, include_not_novel=opt["include_not_novel"], progress=opt["progress"])
        counter["Survivors"] = len(survivors)
        for stage in config.stages:
            log.info("Stage {}: {:,} evaluated, {:,} passed".format(stage, report[stage]["evaluated"], report[stage]["passed"]))

        log.warning("Writing results")
        outdir = opt["output_dir"]
        mkdir(outdir, exist_ok=True)
        screened = [c for c in candidates if c.verdicts]
        write_verdicts(os.path.join(outdir, "verdicts.csv"), screened, config.stages, prov=prov)
        write_json(os.path.join(outdir, "screen_report.json"), OrderedDict([("thresholds", config.to_dict()), ("report", report)]), prov=prov)
        with Candidate_Writer(os.path.join(outdir, "survivors.fa"), prov=prov, verbose=opt["verbose"]) as writer:
            for cand in survivors:
                writer.write(cand)
    finally:
        log_dict(counter, log.info, "Results summary")
    return survivors, report


def Sim_Screen(
    manifest_fn: str,
    output_fn: str,
    labels_fn: str = None,
    report_fn: str = None,
    seed: int = 0,
    config_fn: str = None,
    verbose: bool = False,
    quiet: bool = False,
    progress: bool = False,
    **kwargs
):
    """
    Contact variance screen of membrane simulation trajectories: binding time, mean and variance of the
    peptide-membrane contacts after binding, checked against the contact rule
    * manifest_fn
        CSV manifest with columns sequence_id, path (one `time_ns,contacts` CSV per sequence)
    * output_fn
        Path of the per-sequence verdict CSV
    * labels_fn
        Optional CSV with columns sequence_id, active (1/0) to compute the sensitivity and specificity of the
        variance rule
    * report_fn
        Path of the JSON summary
    * seed
        Recorded in the output provenance
    * config_fn
        Pipeline config file
    """
    opt, log, prov = init_command(Sim_Screen, locals(), "pepCLaSS_Sim_Screen", config_classes=[ScreenConfig])
    counter = Counter()
    try:
        config = build_config(ScreenConfig, opt)
        manifest = load_contact_manifest(opt["manifest_fn"])
        counter["Trajectories"] = len(manifest)

        log.warning("Computing contact statistics")
        rows, all_stats = [], OrderedDict()
        for seq_id, path in tqdm(manifest, desc="\tProgress", unit=" trajectories", disable=not opt["progress"]):
            stats = contact_stats(load_contact_series(path, seq_id), config.gap_tolerance)
            passed, reason = simscreen_filter(stats, config)
            all_stats[seq_id] = stats
            counter["Passed" if passed else "Failed ({})".format(reason)] += 1
            if isinstance(stats, NotBound):
                rows.append([seq_id, None, None, None, int(passed), reason])
            else:
                rows.append([seq_id, stats.binding_time_ns, stats.mean_contacts, stats.var_contacts, int(passed), reason or ""])
        df = pd.DataFrame(rows, columns=["sequence_id", "binding_time_ns", "mean_contacts", "var_contacts", "passed", "reason"])
        mkbasedir(opt["output_fn"], exist_ok=True)
        with open(opt["output_fn"], "w") as fp:
            fp.write(provenance_line(prov))
            df.to_csv(fp, index=False, float_format="%.6f")

        summary = OrderedDict([("trajectories", len(df)), ("passed", int(df["passed"].sum()))])
        if opt["labels_fn"]:
            check_readable(opt["labels_fn"], "Activity labels file")
            labels = pd.read_csv(opt["labels_fn"], dtype={"sequence_id": str}, comment="#")
            if not {"sequence_id", "active"} <= set(labels.columns):
                raise MalformedRowError(opt["labels_fn"], 0, "expected columns sequence_id, active")
            labels = labels[labels["sequence_id"].isin(all_stats)]
            summary["variance_rule"] = variance_rule_confusion([all_stats[s] for s in labels["sequence_id"]], labels["active"].astype(int), config)
            log_dict(summary["variance_rule"], log.info, "Variance rule against activity labels")
        if opt["report_fn"]:
            write_json(opt["report_fn"], OrderedDict([("thresholds", config.to_dict()), ("summary", summary)]), prov=prov)
    finally:
        log_dict(counter, log.info, "Results summary")
    return df
