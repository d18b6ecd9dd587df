# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
from collections import OrderedDict, Counter

# Local imports
from pepCLaSS.common import *
from pepCLaSS.config import init_command, build_config
from pepCLaSS.corpus import LabeledCorpus
from pepCLaSS.models.autoencoder import AeConfig, SequenceAutoencoder, train, evaluate
from pepCLaSS.models.langmodel import CharLanguageModel

# ~~~~~~~~~~~~~~MAIN FUNCTIONS~~~~~~~~~~~~~~#


def AE_Train(
    corpus_fn: str,
    checkpoint_fn: str,
    log_fn: str = None,
    seed: int = 0,
    config_fn: str = None,
    verbose: bool = False,
    quiet: bool = False,
    progress: bool = False,
    **kwargs
):
    """
    Train the sequence autoencoder (WAE or beta-VAE objective) on the train split of a corpus.
    Hyperparameters are the autoencoder options, taken from the command line or the config file
    * corpus_fn
        Corpus TSV file written by ingest
    * checkpoint_fn
        Path of the autoencoder checkpoint, refreshed every eval_interval iterations
    * log_fn
        Path of the line-delimited JSON training log
    * seed
        Seed of parameters init, batch order and noise
    * config_fn
        Pipeline config file
    """
    opt, log, prov = init_command(AE_Train, locals(), "pepCLaSS_AE_Train", config_classes=[AeConfig])
    counter = Counter()
    try:
        config = build_config(AeConfig, opt)
        log.warning("Loading corpus")
        corpus = LabeledCorpus.load(opt["corpus_fn"], verbose=opt["verbose"], quiet=opt["quiet"])
        counter["Train sequences"] = len(corpus.split("train"))

        log.warning("Training {} autoencoder".format(config.objective))
        model, records = train(corpus, config, opt["checkpoint_fn"], log_fn=opt["log_fn"], prov=prov, progress=opt["progress"], log=log)
        counter["Iterations"] = config.iterations
        if records:
            last = records[-1]
            log_dict(last, log.info, "Last training record")
            if last["kl_per_dim"] < 0.01:
                log.info("Mean KL per latent dimension below 0.01: the posterior has collapsed")
    finally:
        log_dict(counter, log.info, "Results summary")
    return model


def AE_Eval(
    checkpoint_fn: str,
    corpus_fn: str,
    output_fn: str,
    lm_fn: str = None,
    split: str = "heldout",
    sample_count: int = 500,
    beam_size: int = None,
    seed: int = 0,
    config_fn: str = None,
    verbose: bool = False,
    quiet: bool = False,
    progress: bool = False,
    **kwargs
):
    """
    Evaluate a trained autoencoder: reconstruction NLL, BLEU and exact reconstruction rate on a corpus split,
    posterior collapse diagnostics, and perplexity of prior samples when a language model is given
    * checkpoint_fn
        Autoencoder checkpoint
    * corpus_fn
        Corpus TSV file written by ingest
    * output_fn
        Path of the JSON evaluation report
    * lm_fn
        Language model checkpoint used for the perplexity metrics
    * split
        Corpus split to evaluate on
    * sample_count
        Number of prior samples scored by the language model
    * beam_size
        Beam width (default: the one of the autoencoder config)
    * seed
        Seed of the prior samples
    * config_fn
        Pipeline config file
    """
    opt, log, prov = init_command(AE_Eval, locals(), "pepCLaSS_AE_Eval")
    counter = Counter()
    try:
        log.warning("Loading models and corpus")
        model = SequenceAutoencoder.load(opt["checkpoint_fn"])
        lm = CharLanguageModel.load(opt["lm_fn"]) if opt["lm_fn"] else None
        corpus = LabeledCorpus.load(opt["corpus_fn"], verbose=opt["verbose"], quiet=opt["quiet"])
        heldout = corpus.sequences(opt["split"])
        counter["Evaluated sequences"] = len(heldout)

        log.warning("Evaluating")
        metrics = evaluate(model, heldout, lm=lm, sample_count=opt["sample_count"], seed=opt["seed"], beam_size=opt["beam_size"], progress=opt["progress"])
        d = OrderedDict()
        d["checkpoint"] = opt["checkpoint_fn"]
        d["objective"] = model.config.objective
        d["split"] = opt["split"]
        d["metrics"] = metrics
        write_json(opt["output_fn"], d, prov=prov)
        log_dict(metrics, log.info, "Evaluation metrics")
    finally:
        log_dict(counter, log.info, "Results summary")
    return metrics
