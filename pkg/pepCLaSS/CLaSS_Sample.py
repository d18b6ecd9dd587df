# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
from collections import OrderedDict, Counter

# Local imports
from pepCLaSS.common import *
from pepCLaSS.config import init_command
from pepCLaSS.corpus import LabeledCorpus, validate_sequence, SequenceRejection
from pepCLaSS.models.autoencoder import SequenceAutoencoder
from pepCLaSS.models.latent_models import MixtureDensity, load_classifiers, encode_means
from pepCLaSS.class_sampler import AttributeTarget, Candidate_Writer, generate_candidates, unconditioned_candidates
from pepCLaSS.analysis.probes import interpolate

# ~~~~~~~~~~~~~~MAIN FUNCTIONS~~~~~~~~~~~~~~#


def CLaSS_Sample(
    ae_fn: str,
    gmm_fn: str,
    output_fasta_fn: str,
    clf_fn: str = None,
    target: [str] = ["amp=1"],
    n: int = 1000,
    output_csv_fn: str = None,
    corpus_fn: str = None,
    max_attempts: int = None,
    beam_size: int = None,
    streams: int = 8,
    unconditioned: bool = False,
    seed: int = 0,
    threads: int = 1,
    config_fn: str = None,
    verbose: bool = False,
    quiet: bool = False,
    progress: bool = False,
    **kwargs
):
    """
    Conditional latent space sampling: draw latent points from the mixture density, accept them with the
    product of the latent classifier probabilities of the target attribute values, decode the accepted
    points by beam search and merge duplicates. Sequences found in the training corpus are flagged not novel
    * ae_fn
        Autoencoder checkpoint
    * gmm_fn
        Mixture density checkpoint
    * output_fasta_fn
        Path of the candidates FASTA file (a JSON sidecar with provenance and run statistics is written next to it)
    * clf_fn
        Latent classifiers checkpoint (required unless unconditioned)
    * target
        Target attribute values as attribute=value items (e.g. amp=1 toxic=0)
    * n
        Number of latent points to accept
    * output_csv_fn
        Path of the companion CSV with latent norms and per-classifier probabilities
    * corpus_fn
        Corpus TSV used to flag candidates identical to a training sequence
    * max_attempts
        Maximum number of latent draws (default: 1000 per accepted point)
    * beam_size
        Beam width (default: the one of the autoencoder config)
    * streams
        Number of independent random streams the draws are split into
    * unconditioned
        Decode plain mixture samples instead (baseline for controllability checks)
    * seed
        Seed of the random streams
    * threads
        Maximum number of worker processes
    * config_fn
        Pipeline config file
    """
    opt, log, prov = init_command(CLaSS_Sample, locals(), "pepCLaSS_CLaSS_Sample")
    counter = Counter()
    try:
        log.warning("Loading models")
        model = SequenceAutoencoder.load(opt["ae_fn"])
        gmm = MixtureDensity.load(opt["gmm_fn"])
        if gmm.dim != model.latent_dim:
            raise ModelError("Mixture dimension {} does not match the autoencoder latent dimension {}".format(gmm.dim, model.latent_dim))
        classifiers = OrderedDict()
        if opt["clf_fn"]:
            classifiers, _ = load_classifiers(opt["clf_fn"])
        elif not opt["unconditioned"]:
            raise ConfigError("clf_fn is required for conditional sampling")
        training = []
        if opt["corpus_fn"]:
            training = LabeledCorpus.load(opt["corpus_fn"], verbose=opt["verbose"], quiet=opt["quiet"]).sequences("train")

        common = dict(training=training, beam_size=opt["beam_size"], threads=opt["threads"], progress=opt["progress"])
        if opt["unconditioned"]:
            log.warning("Sampling and decoding {:,} unconditioned latent points".format(opt["n"]))
            candidates, stats = unconditioned_candidates(model, gmm, opt["n"], seed=opt["seed"], classifiers=classifiers, **common)
        else:
            target = AttributeTarget.parse(opt["target"])
            log.warning("Sampling {:,} latent points for target {}".format(opt["n"], target))
            log.info("Launching up to {} worker processes".format(opt["threads"]))
            candidates, stats = generate_candidates(
                model, gmm, classifiers, target, opt["n"], seed=opt["seed"], max_attempts=opt["max_attempts"], streams=opt["streams"], **common
            )
        counter.update(stats)

        log.warning("Writing candidates")
        writer = Candidate_Writer(opt["output_fasta_fn"], opt["output_csv_fn"], attributes=list(classifiers), prov=prov, verbose=opt["verbose"])
        with writer:
            try:
                writer.stats = OrderedDict(stats)
                for cand in candidates:
                    writer.write(cand)
            except BaseException:
                writer.abort()
                raise
    finally:
        log_dict(counter, log.info, "Results summary")
    return candidates


def Latent_Interpolate(
    ae_fn: str,
    start_seq: str,
    end_seq: str,
    output_fn: str,
    clf_fn: str = None,
    steps: int = 10,
    beam_size: int = None,
    c_terminal_amidated: bool = True,
    seed: int = 0,
    config_fn: str = None,
    verbose: bool = False,
    quiet: bool = False,
    progress: bool = False,
    **kwargs
):
    """
    Decode evenly spaced points on the segment between the posterior means of two sequences. Each step is
    reported with its decoded sequence, descriptors and latent classifier probabilities
    * ae_fn
        Autoencoder checkpoint
    * start_seq
        Sequence at the start of the path
    * end_seq
        Sequence at the end of the path
    * output_fn
        Path of the interpolation CSV
    * clf_fn
        Latent classifiers checkpoint
    * steps
        Number of points on the path, ends included
    * beam_size
        Beam width (default: the one of the autoencoder config)
    * c_terminal_amidated
        Compute charges for amidated C-termini
    * seed
        Recorded in the output provenance
    * config_fn
        Pipeline config file
    """
    opt, log, prov = init_command(Latent_Interpolate, locals(), "pepCLaSS_Interpolate")
    counter = Counter()
    try:
        model = SequenceAutoencoder.load(opt["ae_fn"])
        for key in ("start_seq", "end_seq"):
            seq = validate_sequence(opt[key], model.config.max_seq_length)
            if isinstance(seq, SequenceRejection):
                raise DataError("Invalid {} `{}` ({})".format(key, opt[key], seq.reason.value))
        classifiers = load_classifiers(opt["clf_fn"])[0] if opt["clf_fn"] else None

        log.warning("Decoding the latent path")
        mu = encode_means(model, [opt["start_seq"], opt["end_seq"]])
        df = interpolate(model, mu[0], mu[1], opt["steps"], classifiers, opt["beam_size"], opt["c_terminal_amidated"])
        counter["Steps"] = len(df)
        counter["Distinct decoded sequences"] = df["sequence"].nunique()
        mkbasedir(opt["output_fn"], exist_ok=True)
        with open(opt["output_fn"], "w") as fp:
            fp.write(provenance_line(prov))
            df.to_csv(fp, index=False, float_format="%.6f")
    finally:
        log_dict(counter, log.info, "Results summary")
    return df
