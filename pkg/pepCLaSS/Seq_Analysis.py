# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
from collections import OrderedDict, Counter

# Local imports
from pepCLaSS.common import *
from pepCLaSS.config import init_command
from pepCLaSS.corpus import LabeledCorpus, amino_acid_composition, AMINO_ACIDS
from pepCLaSS.class_sampler import read_sequences
from pepCLaSS.models.autoencoder import SequenceAutoencoder
from pepCLaSS.analysis.descriptors import descriptors_table
from pepCLaSS.analysis.alignment import novelty_report
from pepCLaSS.analysis.kmers import kmer_panel
from pepCLaSS.analysis.probes import probe_similarity_correlation

# ~~~~~~~~~~~~~~MAIN FUNCTIONS~~~~~~~~~~~~~~#


def Seq_Descriptors(
    seq_file: str,
    output_fn: str,
    panel_fn: str = None,
    kmer_sizes: [int] = [3, 4, 5, 6],
    top_kmers: int = 10,
    c_terminal_amidated: bool = True,
    pH: float = 7.0,
    seed: int = 0,
    config_fn: str = None,
    verbose: bool = False,
    quiet: bool = False,
    progress: bool = False,
    **kwargs
):
    """
    Compute the physicochemical descriptors of a set of peptides (charge, hydrophobicity, hydrophobic moment,
    aromaticity, pI...) plus a diversity panel with k-mer uniqueness and residue composition
    * seq_file
        FASTA or CSV file of sequences
    * output_fn
        Path of the descriptor CSV (one row per sequence)
    * panel_fn
        Path of the JSON diversity panel
    * kmer_sizes
        Window sizes of the k-mer statistics
    * top_kmers
        Number of most frequent k-mers listed per window size
    * c_terminal_amidated
        Compute charges for amidated C-termini
    * pH
        pH of the net charge
    * seed
        Recorded in the output provenance
    * config_fn
        Pipeline config file
    """
    opt, log, prov = init_command(Seq_Descriptors, locals(), "pepCLaSS_Descriptors")
    counter = Counter()
    try:
        log.warning("Reading sequences")
        ids, sequences = [], []
        for seq_id, seq in read_sequences(opt["seq_file"]):
            if not seq or set(seq) - set(AMINO_ACIDS):
                counter["Skipped sequences (empty or non natural residues)"] += 1
                continue
            ids.append(seq_id)
            sequences.append(seq)
        counter["Sequences"] = len(sequences)
        if not sequences:
            raise DataError("No valid sequence in `{}`".format(opt["seq_file"]))

        log.warning("Computing descriptors")
        df = descriptors_table(sequences, ids, c_terminal_amidated=opt["c_terminal_amidated"], pH=opt["pH"])
        mkbasedir(opt["output_fn"], exist_ok=True)
        with open(opt["output_fn"], "w") as fp:
            fp.write(provenance_line(prov))
            df.to_csv(fp, index=False, float_format="%.6f")
        log_dict(df.drop(columns=["id", "sequence"]).mean().round(4).to_dict(), log.info, "Mean descriptors")

        if opt["panel_fn"]:
            log.warning("Computing diversity panel")
            panel = OrderedDict()
            panel["sequences"] = len(sequences)
            panel["unique_sequences"] = len(set(sequences))
            panel["kmers"] = OrderedDict((str(k), v) for k, v in kmer_panel(sequences, opt["kmer_sizes"], opt["top_kmers"]).items())
            panel["composition"] = OrderedDict(zip(AMINO_ACIDS, amino_acid_composition(sequences)))
            write_json(opt["panel_fn"], panel, prov=prov)
    finally:
        log_dict(counter, log.info, "Results summary")
    return df


def Seq_Align(
    seq_file: str,
    corpus_fn: str,
    output_fn: str,
    split: str = "train",
    gap_open: int = -9,
    gap_extend: int = -1,
    seed: int = 0,
    threads: int = 1,
    config_fn: str = None,
    verbose: bool = False,
    quiet: bool = False,
    progress: bool = False,
    **kwargs
):
    """
    Novelty of generated sequences: best PAM30 global alignment of every query against the sequences of a
    corpus split, with identity, positive, gap and coverage percentages
    * seq_file
        FASTA or CSV file of query sequences
    * corpus_fn
        Corpus TSV file written by ingest
    * output_fn
        Path of the novelty CSV
    * split
        Corpus split used as reference
    * gap_open
        Score of the first position of a gap
    * gap_extend
        Score of every following gap position
    * seed
        Recorded in the output provenance
    * threads
        Maximum number of worker processes
    * config_fn
        Pipeline config file
    """
    opt, log, prov = init_command(Seq_Align, locals(), "pepCLaSS_Align")
    counter = Counter()
    try:
        ids, queries = [], []
        for seq_id, seq in read_sequences(opt["seq_file"]):
            ids.append(seq_id)
            queries.append(seq)
        reference = LabeledCorpus.load(opt["corpus_fn"], verbose=opt["verbose"], quiet=opt["quiet"]).sequences(opt["split"])
        counter["Queries"] = len(queries)
        counter["Reference sequences"] = len(reference)

        log.warning("Aligning queries against the {} split".format(opt["split"]))
        log.info("Launching up to {} worker processes".format(opt["threads"]))
        df = novelty_report(
            queries, reference, ids=ids, threads=opt["threads"], progress=opt["progress"], gap_open=opt["gap_open"], gap_extend=opt["gap_extend"]
        )
        counter["Exact matches"] = int((df["sequence"] == df["best_match"]).sum())
        mkbasedir(opt["output_fn"], exist_ok=True)
        with open(opt["output_fn"], "w") as fp:
            fp.write(provenance_line(prov))
            df.to_csv(fp, index=False, float_format="%.6f")
    finally:
        log_dict(counter, log.info, "Results summary")
    return df


def Latent_Probe(
    ae_fn: str,
    corpus_fn: str,
    output_fn: str,
    pairs_fn: str = None,
    split: str = "heldout",
    pair_count: int = 1000,
    neighbors: int = 10,
    bootstrap: int = 1000,
    shuffle: bool = False,
    seed: int = 0,
    config_fn: str = None,
    verbose: bool = False,
    quiet: bool = False,
    progress: bool = False,
    **kwargs
):
    """
    Correlation between the alignment similarity of sequence pairs and the distance of their latent
    encodings, over near neighbor pairs, with a bootstrap confidence interval
    * ae_fn
        Autoencoder checkpoint
    * corpus_fn
        Corpus TSV file written by ingest
    * output_fn
        Path of the JSON correlation summary
    * pairs_fn
        Path of the pair CSV (pair_id, sequences, similarity, distance)
    * split
        Corpus split to sample pairs from
    * pair_count
        Number of sampled pairs
    * neighbors
        Each anchor is paired with one of its `neighbors` closest latent points
    * bootstrap
        Number of bootstrap resamples of the interval
    * shuffle
        Permute distances across pairs (null model)
    * seed
        Seed of the pair sampling and bootstrap
    * config_fn
        Pipeline config file
    """
    opt, log, prov = init_command(Latent_Probe, locals(), "pepCLaSS_Probe")
    counter = Counter()
    try:
        model = SequenceAutoencoder.load(opt["ae_fn"])
        sequences = LabeledCorpus.load(opt["corpus_fn"], verbose=opt["verbose"], quiet=opt["quiet"]).sequences(opt["split"])
        counter["Sequences"] = len(sequences)

        log.warning("Probing the latent space")
        summary, df = probe_similarity_correlation(
            model,
            sequences,
            pair_count=opt["pair_count"],
            seed=opt["seed"],
            neighbors=opt["neighbors"],
            bootstrap=opt["bootstrap"],
            shuffle=opt["shuffle"],
            progress=opt["progress"],
        )
        counter["Pairs"] = len(df)
        log_dict(summary, log.info, "Similarity vs latent distance")
        write_json(opt["output_fn"], summary, prov=prov)
        if opt["pairs_fn"]:
            mkbasedir(opt["pairs_fn"], exist_ok=True)
            with open(opt["pairs_fn"], "w") as fp:
                fp.write(provenance_line(prov))
                df.to_csv(fp, index=False, float_format="%.6f")
    finally:
        log_dict(counter, log.info, "Results summary")
    return summary
