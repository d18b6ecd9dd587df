#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
import argparse
import sys

# Local imports
import pepCLaSS as pkg
from pepCLaSS.common import *
from pepCLaSS.Corpus_Ingest import Corpus_Ingest
from pepCLaSS.AE_Train import AE_Train, AE_Eval
from pepCLaSS.LM_Train import LM_Train, LM_Score
from pepCLaSS.Latent_Fit import Latent_Embed, GMM_Fit, Latent_Clf_Fit
from pepCLaSS.CLaSS_Sample import CLaSS_Sample, Latent_Interpolate
from pepCLaSS.Seq_Screen import Seq_Clf_Train, Seq_Screen, Sim_Screen
from pepCLaSS.Seq_Analysis import Seq_Descriptors, Seq_Align, Latent_Probe
from pepCLaSS.Pipeline_Report import Pipeline_Report
from pepCLaSS.models.autoencoder import AeConfig
from pepCLaSS.models.langmodel import LmConfig
from pepCLaSS.models.seq_classifier import SeqClfConfig
from pepCLaSS.screening import ScreenConfig

COMMON_OPTIONS = ("seed", "threads", "config_fn", "verbose", "quiet", "progress")

# ~~~~~~~~~~~~~~TOP LEVEL ENTRY POINT~~~~~~~~~~~~~~#
def main(args=None):
    """ Main entry point for pepCLaSS command line interface"""
    # Parser and subparsers for command
    parser = argparse.ArgumentParser(description=pkg.__description__)
    parser.add_argument("--version", action="version", version="{} v{}".format(pkg.__name__, pkg.__version__))
    subparsers = parser.add_subparsers(description="%(prog)s implements the following subcommands", dest="subcommands")
    subparsers.required = True
    all_sp = []

    def add_arg(group, f, arg):
        name, short_name = arg if isinstance(arg, tuple) else (arg, None)
        arg_from_docstr(group, f, name, short_name)

    def add_subparser(name, f, io_args, misc_args=(), config_classes=()):
        sp = subparsers.add_parser(name, description=doc_func(f))
        sp.set_defaults(func=f)
        sp_io = sp.add_argument_group("Input/Output options")
        for arg in io_args:
            add_arg(sp_io, f, arg)
        if misc_args:
            sp_ms = sp.add_argument_group("Misc options")
            for arg in misc_args:
                add_arg(sp_ms, f, arg)
        for cls in config_classes:
            sp_cls = sp.add_argument_group("{} options".format(cls.__name__))
            for arg in make_arg_dict(cls):
                if arg not in COMMON_OPTIONS:
                    arg_from_docstr(sp_cls, cls, arg)
        all_sp.append(sp)
        return sp

    # Corpus
    add_subparser(
        "ingest",
        Corpus_Ingest,
        [("seq_files", "i"), ("label_files", "l"), ("corpus_fn", "o"), "skip_report_fn"],
        ["max_seq_length", "split_ratios"],
    )

    # Autoencoder
    add_subparser("train-ae", AE_Train, [("corpus_fn", "i"), ("checkpoint_fn", "o"), "log_fn"], config_classes=[AeConfig])
    add_subparser(
        "eval-ae",
        AE_Eval,
        [("checkpoint_fn", "m"), ("corpus_fn", "i"), ("output_fn", "o"), "lm_fn"],
        ["split", "sample_count", "beam_size"],
    )

    # Language model
    add_subparser("lm-train", LM_Train, [("corpus_fn", "i"), ("checkpoint_fn", "o"), "log_fn", "sanity_fn"], config_classes=[LmConfig])
    add_subparser("lm-score", LM_Score, [("checkpoint_fn", "m"), ("seq_file", "i"), ("output_fn", "o")])

    # Latent models
    add_subparser("embed", Latent_Embed, [("checkpoint_fn", "m"), ("corpus_fn", "i"), ("output_fn", "o")], ["splits", "samples_per_seq"])
    add_subparser(
        "fit-gmm",
        GMM_Fit,
        [("latents_fn", "i"), "heldout_fn", ("output_fn", "o")],
        ["components", "var_floor", "tol", "max_iter"],
    )
    add_subparser(
        "fit-latent-clf",
        Latent_Clf_Fit,
        [("latents_fn", "i"), "heldout_fn", ("output_fn", "o")],
        ["attributes", "C", "max_iter"],
    )

    # Screening
    add_subparser(
        "train-seq-clf",
        Seq_Clf_Train,
        [("corpus_fn", "i"), ("checkpoint_fn", "o"), "log_fn", "report_fn"],
        [("attribute", "a")],
        config_classes=[SeqClfConfig],
    )

    # Generation
    add_subparser(
        "class-sample",
        CLaSS_Sample,
        [("ae_fn", "m"), "gmm_fn", "clf_fn", "corpus_fn", ("output_fasta_fn", "o"), "output_csv_fn"],
        ["target", "n", "max_attempts", "beam_size", "streams", "unconditioned"],
    )
    add_subparser(
        "screen",
        Seq_Screen,
        [("candidates_fn", "i"), "clf_fns", "lm_fn", "calibration_fn", ("output_dir", "o")],
        ["include_not_novel"],
        config_classes=[ScreenConfig],
    )
    add_subparser(
        "simscreen",
        Sim_Screen,
        [("manifest_fn", "i"), "labels_fn", ("output_fn", "o"), "report_fn"],
        config_classes=[ScreenConfig],
    )

    # Analysis
    add_subparser(
        "descriptors",
        Seq_Descriptors,
        [("seq_file", "i"), ("output_fn", "o"), "panel_fn"],
        ["kmer_sizes", "top_kmers", "c_terminal_amidated", "pH"],
    )
    add_subparser("align", Seq_Align, [("seq_file", "i"), "corpus_fn", ("output_fn", "o")], ["split", "gap_open", "gap_extend"])
    add_subparser(
        "interpolate",
        Latent_Interpolate,
        [("ae_fn", "m"), "clf_fn", ("output_fn", "o")],
        ["start_seq", "end_seq", "steps", "beam_size", "c_terminal_amidated"],
    )
    add_subparser(
        "probe",
        Latent_Probe,
        [("ae_fn", "m"), ("corpus_fn", "i"), ("output_fn", "o"), "pairs_fn"],
        ["split", "pair_count", "neighbors", "bootstrap", "shuffle"],
    )
    add_subparser(
        "report",
        Pipeline_Report,
        [("candidates_fn", "i"), "screen_dir", "novelty_fn", "corpus_fn", ("outdir", "o")],
        ["n_top", "rank_by", "c_terminal_amidated"],
    )

    # Add common group parsers
    for sp in all_sp:
        sp_rn = sp.add_argument_group("Run options")
        sp_rn.add_argument("-c", "--config_fn", type=str, default=argparse.SUPPRESS, help="Pipeline config file")
        sp_rn.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Random seed (default: 0)")
        sp_rn.add_argument("-t", "--threads", type=int, default=argparse.SUPPRESS, help="Maximum number of worker processes (default: 1)")
        sp_vb = sp.add_argument_group("Verbosity options")
        sp_vb.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help="Increase verbosity")
        sp_vb.add_argument("-q", "--quiet", action="store_true", default=argparse.SUPPRESS, help="Reduce verbosity")
        sp_vb.add_argument("-p", "--progress", action="store_true", default=argparse.SUPPRESS, help="Display a progress bar")

    # Parse args and call subfunction
    args = parser.parse_args(args)
    kwargs = vars(args)
    func = kwargs.pop("func")
    subcommand = kwargs.pop("subcommands")
    kwargs["explicit_args"] = set(kwargs)

    try:
        func(**kwargs)
    except pepCLaSSError as E:
        sys.stderr.write(E.to_json(subcommand) + "\n")
        sys.exit(E.exit_code)


if __name__ == "__main__":
    main()
