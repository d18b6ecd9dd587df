# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
import json
from collections import OrderedDict, Counter

# Third party imports
import numpy as np
import torch
import torch.nn.functional as F
from tqdm import trange

# Local imports
from pepCLaSS.common import *
from pepCLaSS.corpus import Vocabulary, PAD, canonical_attribute
from pepCLaSS.models.tensor_core import *

# ~~~~~~~~~~~~~~CONFIG~~~~~~~~~~~~~~#


class SeqClfConfig:
    def __init__(
        self,
        hidden_size: int = 100,
        embedding_size: int = 50,
        dropout: float = 0.3,
        lr: float = 1e-3,
        iterations: int = 5000,
        batch_size: int = 32,
        clip_norm: float = 5.0,
        eval_interval: int = 500,
        max_seq_length: int = 25,
        precision: str = "float64",
        seed: int = 0,
    ):
        """
        Sequence level attribute classifier hyperparameters
        * hidden_size
            BiLSTM hidden size per direction
        * embedding_size
            Token embedding size
        * dropout
            Dropout rate on the pooled features during training
        * lr
            Adam learning rate
        * iterations
            Number of training minibatches
        * batch_size
            Minibatch size
        * clip_norm
            Global gradient norm cap (0 to disable)
        * eval_interval
            Iterations between log records
        * max_seq_length
            Longest scorable sequence
        * precision
            float64 or float32
        * seed
            Seed of parameters init, dropout masks and batch order
        """
        self.hidden_size = hidden_size
        self.embedding_size = embedding_size
        self.dropout = dropout
        self.lr = lr
        self.iterations = iterations
        self.batch_size = batch_size
        self.clip_norm = clip_norm
        self.eval_interval = eval_interval
        self.max_seq_length = max_seq_length
        self.precision = precision
        self.seed = seed
        if not 0 <= dropout < 1:
            raise ConfigError("dropout must be in [0, 1)")
        for name in ("hidden_size", "embedding_size", "iterations", "batch_size", "eval_interval"):
            if getattr(self, name) < 1:
                raise ConfigError("{} must be positive".format(name))
        get_dtype(precision)

    def to_dict(self):
        return OrderedDict((k, getattr(self, k)) for k in make_arg_dict(SeqClfConfig))

    @classmethod
    def from_dict(cls, d):
        valid = make_arg_dict(cls)
        return cls(**{k: v for k, v in d.items() if k in valid})


# ~~~~~~~~~~~~~~MODEL~~~~~~~~~~~~~~#


class SequenceClassifier:
    def __init__(self, attribute, config=None, vocabulary=None, params=None):
        """Bidirectional LSTM, max-pooled over the non padding steps, then a linear logit head"""
        self.attribute = canonical_attribute(attribute)
        self.config = config or SeqClfConfig()
        self.vocabulary = vocabulary or Vocabulary()
        V, E, H = len(self.vocabulary), self.config.embedding_size, self.config.hidden_size
        if params is None:
            params = ParameterSet(seed=self.config.seed, dtype=get_dtype(self.config.precision))
            params.init_matrix("embedding", (V, E))
            init_rnn(params, "lstm", E, H, cell="lstm", direction="bidirectional")
            params.init_matrix("head.weight", (1, 2 * H))
            params.init_zeros("head.bias", (1,))
        else:
            params.check_shape("embedding", (V, E))
            params.check_shape("head.weight", (1, 2 * H))
        self.params = params

    def __repr__(self):
        return "SequenceClassifier({}, hidden={}, {})".format(self.attribute, self.config.hidden_size, self.params)

    def logits(self, tokens, training=False):
        tokens = torch.as_tensor(tokens)
        mask = tokens != PAD
        out, _ = lstm_forward(self.params, tokens, "bidirectional", self.config.hidden_size, prefix="lstm", mask=mask)
        out = out.masked_fill(~mask.unsqueeze(-1), float("-inf"))
        pooled = out.max(dim=1).values
        pooled = dropout(pooled, self.config.dropout, self.params.generator, training)
        return linear(pooled, self.params["head.weight"], self.params["head.bias"]).squeeze(-1)

    def loss(self, tokens, labels):
        labels = torch.as_tensor(labels, dtype=self.params.dtype)
        return F.binary_cross_entropy_with_logits(self.logits(tokens, training=True), labels)

    def logit_batch(self, sequences, chunk_size=256):
        """Raw pre-sigmoid logits"""
        sequences = list(sequences)
        res = []
        with torch.no_grad():
            for i in range(0, len(sequences), chunk_size):
                tokens = self.vocabulary.tokenize_batch(sequences[i : i + chunk_size], self.config.max_seq_length)
                res.append(self.logits(tokens).to(torch.float64).numpy())
        return np.concatenate(res) if res else np.zeros(0)

    def accuracy(self, sequences, labels):
        if len(sequences) == 0:
            return None
        return float(np.mean((self.logit_batch(sequences) >= 0).astype(np.int64) == np.asarray(labels)))

    def save(self, fn, prov=None, **extra):
        metadata = OrderedDict()
        metadata["kind"] = "seq_classifier"
        metadata["attribute"] = self.attribute
        metadata["config"] = self.config.to_dict()
        metadata["vocabulary"] = self.vocabulary.to_list()
        metadata["provenance"] = prov
        metadata.update(extra)
        save_checkpoint(fn, self.params.to_arrays(), metadata)

    @classmethod
    def load(cls, fn):
        tensors, metadata = load_checkpoint(fn, expected_kind="seq_classifier")
        config = SeqClfConfig.from_dict(metadata["config"])
        params = ParameterSet.from_arrays(tensors, dtype=get_dtype(config.precision), seed=config.seed)
        clf = cls(metadata["attribute"], config, Vocabulary(metadata["vocabulary"]), params=params)
        clf.metadata = metadata
        return clf


def seq_logit(clf, sequence):
    return float(clf.logit_batch([sequence])[0])


# ~~~~~~~~~~~~~~TRAINING~~~~~~~~~~~~~~#


def majority_baseline(train_labels, test_labels):
    """Accuracy on the test labels of always predicting the majority train class"""
    if len(test_labels) == 0:
        return None
    majority = int(np.mean(train_labels) >= 0.5)
    return float(np.mean(np.asarray(test_labels) == majority))


def train_seq_classifier(corpus, attribute, config=None, checkpoint_fn=None, log_fn=None, prov=None, progress=False, log=None):
    """
    Train a sequence classifier on the labeled train entries of an attribute. Returns the classifier and a
    report with the test accuracy and the majority-class baseline (heldout split if the test split has no
    labels for the attribute)
    """
    log = log or get_logger(name="pepCLaSS_Seq_Classifier")
    config = config or SeqClfConfig()
    attribute = canonical_attribute(attribute)
    set_deterministic()
    X, y = corpus.labeled(attribute, "train")
    if len(X) == 0:
        raise DataError("No labeled train sequences for attribute {}".format(attribute))
    if len(np.unique(y)) < 2:
        raise SingleClassError("Train labels of {} contain a single class".format(attribute))
    X_test, y_test = corpus.labeled(attribute, "test")
    eval_split = "test"
    if len(X_test) == 0:
        X_test, y_test = corpus.labeled(attribute, "heldout")
        eval_split = "heldout"

    clf = SequenceClassifier(attribute, config, corpus.vocabulary)
    log.info("Model: {}".format(clf))
    tokens = corpus.vocabulary.tokenize_batch(X, config.max_seq_length)
    rng = np.random.default_rng(config.seed)

    records = []
    running = Counter()
    log_fp = None
    if log_fn:
        mkbasedir(log_fn, exist_ok=True)
        log_fp = open(log_fn, "w")
    try:
        for it in trange(config.iterations, desc="\tProgress", unit=" iterations", disable=not progress):
            idx = rng.integers(0, len(X), config.batch_size)
            clf.params.zero_grad()
            loss = clf.loss(tokens[idx], y[idx])
            if not torch.isfinite(loss):
                raise NonFiniteError("Non-finite classifier loss at iteration {}".format(it))
            loss.backward()
            clip_grad_norm(clf.params, config.clip_norm)
            adam_update(clf.params, lr=config.lr)
            running["loss"] += float(loss)
            running["n"] += 1
            if (it + 1) % config.eval_interval == 0 or it + 1 == config.iterations:
                rec = OrderedDict([("iter", it + 1), ("train_bce", running["loss"] / running["n"])])
                rec["{}_accuracy".format(eval_split)] = clf.accuracy(X_test, y_test)
                records.append(rec)
                running = Counter()
                if log_fp:
                    log_fp.write(json.dumps(rec) + "\n")
                log.debug("Iteration {}: train BCE {:.4f}".format(rec["iter"], rec["train_bce"]))
    finally:
        if log_fp:
            log_fp.close()

    report = OrderedDict()
    report["attribute"] = attribute
    report["train_size"] = len(X)
    report["eval_split"] = eval_split
    report["eval_size"] = len(X_test)
    report["train_accuracy"] = clf.accuracy(X, y)
    report["test_accuracy"] = clf.accuracy(X_test, y_test)
    report["majority_baseline"] = majority_baseline(y, y_test)
    if checkpoint_fn:
        clf.save(checkpoint_fn, prov=prov, report=report)
    return clf, report
