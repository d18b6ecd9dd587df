# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
from collections import OrderedDict, Counter

# Third party imports
import pandas as pd

# Local imports
from pepCLaSS.common import *
from pepCLaSS.config import init_command, build_config
from pepCLaSS.corpus import LabeledCorpus, AMINO_ACIDS
from pepCLaSS.class_sampler import read_sequences
from pepCLaSS.models.langmodel import LmConfig, CharLanguageModel, train_lm, sanity_panel

# ~~~~~~~~~~~~~~MAIN FUNCTIONS~~~~~~~~~~~~~~#


def LM_Train(
    corpus_fn: str,
    checkpoint_fn: str,
    log_fn: str = None,
    sanity_fn: str = None,
    seed: int = 0,
    config_fn: str = None,
    verbose: bool = False,
    quiet: bool = False,
    progress: bool = False,
    **kwargs
):
    """
    Train the character level LSTM language model used to score the plausibility of generated sequences.
    Test perplexity is reported against random and single residue strings
    * corpus_fn
        Corpus TSV file written by ingest
    * checkpoint_fn
        Path of the language model checkpoint
    * log_fn
        Path of the line-delimited JSON training log
    * sanity_fn
        Path of the JSON perplexity panel (test vs random vs repeated residue strings)
    * seed
        Seed of parameters init and batch order
    * config_fn
        Pipeline config file
    """
    opt, log, prov = init_command(LM_Train, locals(), "pepCLaSS_LM_Train", config_classes=[LmConfig])
    counter = Counter()
    try:
        config = build_config(LmConfig, opt)
        log.warning("Loading corpus")
        corpus = LabeledCorpus.load(opt["corpus_fn"], verbose=opt["verbose"], quiet=opt["quiet"])
        counter["Train sequences"] = len(corpus.split("train"))

        log.warning("Training language model")
        lm, records = train_lm(corpus, config, opt["checkpoint_fn"], log_fn=opt["log_fn"], prov=prov, progress=opt["progress"], log=log)
        counter["Iterations"] = config.iterations

        log.warning("Computing the perplexity panel")
        panel = sanity_panel(lm, corpus.sequences("test"), seed=opt["seed"])
        log_dict(panel, log.info, "Perplexity panel")
        if panel["test"] is not None and panel["test"] >= panel["random_strings"]:
            log.info("Test perplexity is not lower than the perplexity of random strings")
        if opt["sanity_fn"]:
            write_json(opt["sanity_fn"], panel, prov=prov)
    finally:
        log_dict(counter, log.info, "Results summary")
    return lm


def LM_Score(
    checkpoint_fn: str,
    seq_file: str,
    output_fn: str,
    seed: int = 0,
    config_fn: str = None,
    verbose: bool = False,
    quiet: bool = False,
    progress: bool = False,
    **kwargs
):
    """
    Score sequences with a trained language model. Writes a CSV with the perplexity of every sequence
    * checkpoint_fn
        Language model checkpoint
    * seq_file
        FASTA or CSV file of sequences to score
    * output_fn
        Path of the perplexity CSV
    * seed
        Recorded in the output provenance
    * config_fn
        Pipeline config file
    """
    opt, log, prov = init_command(LM_Score, locals(), "pepCLaSS_LM_Score")
    counter = Counter()
    try:
        lm = CharLanguageModel.load(opt["checkpoint_fn"])
        log.warning("Reading sequences")
        ids, sequences = [], []
        for seq_id, seq in read_sequences(opt["seq_file"]):
            if not seq or len(seq) > lm.config.max_seq_length or set(seq) - set(AMINO_ACIDS):
                counter["Skipped sequences (empty, too long or non natural residues)"] += 1
                continue
            ids.append(seq_id)
            sequences.append(seq)
        counter["Scored sequences"] = len(sequences)

        log.warning("Scoring")
        df = pd.DataFrame({"id": ids, "sequence": sequences, "ppl": lm.perplexity_batch(sequences) if sequences else []})
        mkbasedir(opt["output_fn"], exist_ok=True)
        with open(opt["output_fn"], "w") as fp:
            fp.write(provenance_line(prov))
            df.to_csv(fp, index=False, float_format="%.6f")
        if sequences:
            counter["Corpus perplexity (x1000)"] = int(round(1000 * lm.corpus_perplexity(sequences)))
    finally:
        log_dict(counter, log.info, "Results summary")
    return df
