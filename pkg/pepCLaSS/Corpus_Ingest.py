# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
import os
from collections import OrderedDict, Counter

# Local imports
from pepCLaSS.common import *
from pepCLaSS.config import init_command
from pepCLaSS.corpus import load_corpus, amino_acid_composition, AMINO_ACIDS

# ~~~~~~~~~~~~~~MAIN FUNCTION~~~~~~~~~~~~~~#


def Corpus_Ingest(
    seq_files: [str],
    corpus_fn: str,
    label_files: [str] = [],
    skip_report_fn: str = None,
    max_seq_length: int = 25,
    split_ratios: [float] = [0.8, 0.1, 0.1],
    seed: int = 0,
    config_fn: str = None,
    verbose: bool = False,
    quiet: bool = False,
    progress: bool = False,
    **kwargs
):
    """
    Validate and deduplicate peptide sequences, join the binary attribute labels and assign each sequence
    to a train, heldout or test split from a seeded hash. Writes the corpus TSV and a skip report
    * seq_files
        FASTA or CSV (with a `sequence` column) files of peptide sequences
    * corpus_fn
        Path of the corpus TSV file to write
    * label_files
        CSV files with columns sequence, attribute, value
    * skip_report_fn
        Path of the JSON skip report (default: next to the corpus file)
    * max_seq_length
        Longest accepted sequence
    * split_ratios
        Train, heldout and test fractions
    * seed
        Seed of the split assignment
    * config_fn
        Pipeline config file
    """
    opt, log, prov = init_command(Corpus_Ingest, locals(), "pepCLaSS_Ingest")
    counter = Counter()
    try:
        log.warning("Reading sequence and label files")
        corpus = load_corpus(
            opt["seq_files"],
            opt["label_files"],
            seed=opt["seed"],
            max_seq_length=opt["max_seq_length"],
            ratios=tuple(opt["split_ratios"]),
            verbose=opt["verbose"],
            quiet=opt["quiet"],
        )
        report = corpus.skip_report
        counter["Input sequences"] = report["total"]
        counter["Accepted sequences"] = report["accepted"]
        for reason, n in report["rejected"].items():
            counter["Rejected ({})".format(reason)] = n
        counter["Label conflicts"] = report["label_conflicts"]
        if not len(corpus):
            raise DataError("No valid sequence in the input files")

        log.warning("Writing corpus")
        corpus.save(opt["corpus_fn"], prov=prov)
        skip_report_fn = opt["skip_report_fn"] or os.path.join(os.path.dirname(opt["corpus_fn"]), "skip_report.json")
        summary = corpus.summary()
        summary["Amino acid composition"] = OrderedDict(zip(AMINO_ACIDS, amino_acid_composition(corpus.sequences()).round(4)))
        write_json(skip_report_fn, OrderedDict([("skip_report", report), ("summary", summary)]), prov=prov)
        log_dict(corpus.summary(), log.info, "Corpus summary")

    finally:
        log_dict(counter, log.info, "Results summary")
    return corpus
