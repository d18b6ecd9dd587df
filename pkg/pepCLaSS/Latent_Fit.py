# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
from collections import OrderedDict, Counter

# Local imports
from pepCLaSS.common import *
from pepCLaSS.config import init_command
from pepCLaSS.corpus import LabeledCorpus, canonical_attribute
from pepCLaSS.models.autoencoder import SequenceAutoencoder
from pepCLaSS.models.latent_models import (
    embed_corpus,
    save_latents,
    load_latents,
    fit_gmm,
    gmm_select,
    fit_latent_classifier,
    save_classifiers,
)

# ~~~~~~~~~~~~~~MAIN FUNCTIONS~~~~~~~~~~~~~~#


def Latent_Embed(
    checkpoint_fn: str,
    corpus_fn: str,
    output_fn: str,
    splits: [str] = ["train", "heldout"],
    samples_per_seq: int = 10,
    seed: int = 0,
    config_fn: str = None,
    verbose: bool = False,
    quiet: bool = False,
    progress: bool = False,
    **kwargs
):
    """
    Encode corpus sequences and draw posterior samples. Each split is written to its own latent file
    (`{split}` in output_fn is replaced by the split name)
    * checkpoint_fn
        Autoencoder checkpoint
    * corpus_fn
        Corpus TSV file written by ingest
    * output_fn
        Path of the latent file, with a `{split}` placeholder when several splits are embedded
    * splits
        Corpus splits to embed
    * samples_per_seq
        Posterior samples drawn per sequence
    * seed
        Seed of the posterior noise
    * config_fn
        Pipeline config file
    """
    opt, log, prov = init_command(Latent_Embed, locals(), "pepCLaSS_Embed")
    counter = Counter()
    try:
        if len(opt["splits"]) > 1 and "{split}" not in opt["output_fn"]:
            raise ConfigError("output_fn needs a `{split}` placeholder to embed several splits")
        model = SequenceAutoencoder.load(opt["checkpoint_fn"])
        corpus = LabeledCorpus.load(opt["corpus_fn"], verbose=opt["verbose"], quiet=opt["quiet"])
        for i, split in enumerate(opt["splits"]):
            log.warning("Embedding {} split".format(split))
            dataset = embed_corpus(model, corpus, opt["samples_per_seq"], seed=opt["seed"] + i, split=split)
            save_latents(opt["output_fn"].replace("{split}", split), dataset, prov=prov)
            counter["Latent points ({})".format(split)] = len(dataset.Z)
    finally:
        log_dict(counter, log.info, "Results summary")


def GMM_Fit(
    latents_fn: str,
    output_fn: str,
    heldout_fn: str = None,
    components: [int] = [1, 2, 4, 8],
    var_floor: float = 1e-4,
    tol: float = 1e-6,
    max_iter: int = 500,
    seed: int = 0,
    config_fn: str = None,
    verbose: bool = False,
    quiet: bool = False,
    progress: bool = False,
    **kwargs
):
    """
    Fit the diagonal Gaussian mixture density of the latent space by EM. With several component counts the
    one with the best heldout mean log-likelihood is kept
    * latents_fn
        Latent file of the train split
    * output_fn
        Path of the mixture checkpoint
    * heldout_fn
        Latent file of the heldout split (required to select between several component counts)
    * components
        Candidate numbers of mixture components
    * var_floor
        Lower bound of the component variances
    * tol
        Relative improvement of the train log-likelihood under which EM stops
    * max_iter
        Maximum number of EM iterations
    * seed
        Seed of the k-means++ initialisation
    * config_fn
        Pipeline config file
    """
    opt, log, prov = init_command(GMM_Fit, locals(), "pepCLaSS_GMM_Fit")
    counter = Counter()
    try:
        latents, _ = load_latents(opt["latents_fn"])
        heldout = load_latents(opt["heldout_fn"])[0].Z if opt["heldout_fn"] else None
        components = opt["components"]
        counter["Train latent points"] = len(latents.Z)
        fit_kw = dict(var_floor=opt["var_floor"], tol=opt["tol"], max_iter=opt["max_iter"], progress=opt["progress"], log=log)

        log.warning("Fitting mixture density")
        if len(components) > 1:
            if heldout is None:
                raise ConfigError("Selecting among several component counts needs heldout latents")
            gmm, table = gmm_select(latents.Z, components, seed=opt["seed"], heldout=heldout, **fit_kw)
            log_list(table, log.info, "Log-likelihood per component count")
        else:
            gmm, heldout_ll = fit_gmm(latents.Z, components[0], seed=opt["seed"], heldout=heldout, **fit_kw)
            table = [OrderedDict([("component_count", components[0]), ("train_ll", gmm.history[-1]["train_ll"]), ("heldout_ll", heldout_ll)])]
        counter["Components"] = gmm.component_count
        counter["EM iterations"] = len(gmm.history)
        gmm.save(opt["output_fn"], prov=prov, selection=table)
        if not gmm.converged:
            log.info("EM reached max_iter before convergence")
    finally:
        log_dict(counter, log.info, "Results summary")
    return gmm


def Latent_Clf_Fit(
    latents_fn: str,
    output_fn: str,
    attributes: [str] = ["AMP", "Toxic"],
    heldout_fn: str = None,
    C: float = 1.0,
    max_iter: int = 300,
    seed: int = 0,
    config_fn: str = None,
    verbose: bool = False,
    quiet: bool = False,
    progress: bool = False,
    **kwargs
):
    """
    Fit one L2 regularized logistic regression per attribute on the labeled latent points
    * latents_fn
        Latent file of the train split
    * output_fn
        Path of the latent classifiers checkpoint
    * attributes
        Attributes to fit a classifier for
    * heldout_fn
        Latent file of the heldout split, for heldout accuracy
    * C
        Inverse regularization strength
    * max_iter
        Maximum number of L-BFGS-B iterations
    * seed
        Recorded in the output provenance
    * config_fn
        Pipeline config file
    """
    opt, log, prov = init_command(Latent_Clf_Fit, locals(), "pepCLaSS_Latent_Clf_Fit")
    counter = Counter()
    try:
        latents, _ = load_latents(opt["latents_fn"])
        heldout = load_latents(opt["heldout_fn"])[0] if opt["heldout_fn"] else None
        classifiers, reports = [], []
        for attribute in opt["attributes"]:
            attribute = canonical_attribute(attribute)
            if attribute not in latents.labels:
                raise DataError("No {} labels in `{}`".format(attribute, opt["latents_fn"]))
            log.warning("Fitting latent classifier for {}".format(attribute))
            y = latents.labels[attribute]
            held = (heldout.Z, heldout.labels[attribute]) if heldout is not None and attribute in heldout.labels else None
            clf, report = fit_latent_classifier(latents.Z, y, attribute, C=opt["C"], max_iter=opt["max_iter"], heldout=held)
            log_dict(report, log.info, "{} classifier".format(attribute))
            classifiers.append(clf)
            reports.append(report)
            counter["Labeled latent points ({})".format(attribute)] = int((y >= 0).sum())
        save_classifiers(opt["output_fn"], classifiers, prov=prov, reports=reports)
    finally:
        log_dict(counter, log.info, "Results summary")
    return classifiers
