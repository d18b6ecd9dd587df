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
from pepCLaSS.corpus import Vocabulary, AMINO_ACIDS, PAD, training_batches
from pepCLaSS.models.tensor_core import *

# ~~~~~~~~~~~~~~CONFIG~~~~~~~~~~~~~~#


class LmConfig:
    def __init__(
        self,
        hidden_size: int = 256,
        embedding_size: int = 50,
        lr: float = 1e-3,
        iterations: int = 20000,
        batch_size: int = 32,
        clip_norm: float = 5.0,
        eval_interval: int = 1000,
        max_seq_length: int = 25,
        precision: str = "float64",
        seed: int = 0,
    ):
        """
        Character language model hyperparameters
        * hidden_size
            LSTM hidden size
        * embedding_size
            Token embedding size
        * lr
            Adam learning rate
        * iterations
            Number of training minibatches
        * batch_size
            Minibatch size
        * clip_norm
            Global gradient norm cap (0 to disable)
        * eval_interval
            Iterations between log records and checkpoints
        * max_seq_length
            Longest scorable sequence
        * precision
            float64 or float32
        * seed
            Seed of parameters init and batch order
        """
        self.hidden_size = hidden_size
        self.embedding_size = embedding_size
        self.lr = lr
        self.iterations = iterations
        self.batch_size = batch_size
        self.clip_norm = clip_norm
        self.eval_interval = eval_interval
        self.max_seq_length = max_seq_length
        self.precision = precision
        self.seed = seed
        for name in ("hidden_size", "embedding_size", "iterations", "batch_size", "eval_interval", "max_seq_length"):
            if getattr(self, name) < 1:
                raise ConfigError("{} must be positive".format(name))
        get_dtype(precision)

    def to_dict(self):
        return OrderedDict((k, getattr(self, k)) for k in make_arg_dict(LmConfig))

    @classmethod
    def from_dict(cls, d):
        valid = make_arg_dict(cls)
        return cls(**{k: v for k, v in d.items() if k in valid})


# ~~~~~~~~~~~~~~MODEL~~~~~~~~~~~~~~#


class CharLanguageModel:
    def __init__(self, config=None, vocabulary=None, params=None):
        """Single layer LSTM over residue tokens, trained on next-token prediction"""
        self.config = config or LmConfig()
        self.vocabulary = vocabulary or Vocabulary()
        V, E, H = len(self.vocabulary), self.config.embedding_size, self.config.hidden_size
        if params is None:
            params = ParameterSet(seed=self.config.seed, dtype=get_dtype(self.config.precision))
            params.init_matrix("embedding", (V, E))
            init_rnn(params, "lstm", E, H, cell="lstm", direction="forward")
            params.init_matrix("out.weight", (V, H))
            params.init_zeros("out.bias", (V,))
        else:
            params.check_shape("embedding", (V, E))
            params.check_shape("out.weight", (V, H))
        self.params = params

    def __repr__(self):
        return "CharLanguageModel(hidden={}, {})".format(self.config.hidden_size, self.params)

    def logits(self, tokens):
        inputs = tokens[:, :-1]
        out, _ = lstm_forward(self.params, inputs, "forward", self.config.hidden_size, prefix="lstm", mask=inputs != PAD)
        return linear(out, self.params["out.weight"], self.params["out.bias"])

    def loss(self, tokens):
        tokens = torch.as_tensor(tokens)
        return masked_cross_entropy(self.logits(tokens), tokens[:, 1:])

    def token_logprobs(self, sequences, chunk_size=256):
        """Per sequence arrays of next-token log-probabilities, residues then EOS"""
        sequences = list(sequences)
        res = []
        with torch.no_grad():
            for i in range(0, len(sequences), chunk_size):
                chunk = sequences[i : i + chunk_size]
                tokens = torch.as_tensor(self.vocabulary.tokenize_batch(chunk, self.config.max_seq_length))
                nll = masked_cross_entropy(self.logits(tokens), tokens[:, 1:], reduction="none")
                nll = nll.to(torch.float64).numpy()
                for row, s in zip(nll, chunk):
                    res.append(-row[: len(s) + 1])
        return res

    def perplexity(self, sequence):
        """exp of the mean next-token NLL over the residues and EOS"""
        return self.perplexity_batch([sequence])[0]

    def perplexity_batch(self, sequences):
        return np.array([np.exp(-lp.mean()) for lp in self.token_logprobs(sequences)])

    def corpus_perplexity(self, sequences):
        """Length weighted: exp of the mean NLL over all the tokens of all the sequences"""
        lps = self.token_logprobs(sequences)
        if not lps:
            raise DataError("Cannot compute the perplexity of an empty set")
        return float(np.exp(-np.concatenate(lps).mean()))

    def save(self, fn, prov=None, **extra):
        metadata = OrderedDict()
        metadata["kind"] = "langmodel"
        metadata["config"] = self.config.to_dict()
        metadata["vocabulary"] = self.vocabulary.to_list()
        metadata["provenance"] = prov
        metadata.update(extra)
        save_checkpoint(fn, self.params.to_arrays(), metadata)

    @classmethod
    def load(cls, fn):
        tensors, metadata = load_checkpoint(fn, expected_kind="langmodel")
        config = LmConfig.from_dict(metadata["config"])
        params = ParameterSet.from_arrays(tensors, dtype=get_dtype(config.precision), seed=config.seed)
        model = cls(config, Vocabulary(metadata["vocabulary"]), params=params)
        model.metadata = metadata
        return model


# ~~~~~~~~~~~~~~REFERENCE INPUTS~~~~~~~~~~~~~~#


def random_strings(count, length_range=(5, 25), rng=None):
    """Uniformly random residue strings"""
    rng = rng or np.random.default_rng(0)
    alphabet = np.array(list(AMINO_ACIDS))
    lengths = rng.integers(length_range[0], length_range[1] + 1, count)
    return ["".join(rng.choice(alphabet, n)) for n in lengths]


def repeated_token_strings(count, length_range=(5, 25), rng=None):
    """Strings made of one residue repeated"""
    rng = rng or np.random.default_rng(0)
    lengths = rng.integers(length_range[0], length_range[1] + 1, count)
    return [AMINO_ACIDS[rng.integers(len(AMINO_ACIDS))] * n for n in lengths]


def sanity_panel(lm, test_sequences, count=500, seed=0):
    """Perplexity of held out data against random and single residue strings"""
    rng = np.random.default_rng(seed)
    hi = min(lm.config.max_seq_length, 25)
    d = OrderedDict()
    d["test"] = lm.corpus_perplexity(test_sequences) if test_sequences else None
    d["random_strings"] = lm.corpus_perplexity(random_strings(count, (5, hi), rng))
    d["repeated_token_strings"] = lm.corpus_perplexity(repeated_token_strings(count, (5, hi), rng))
    return d


# ~~~~~~~~~~~~~~TRAINING~~~~~~~~~~~~~~#


def train_lm(corpus, config, checkpoint_fn, log_fn=None, prov=None, progress=False, log=None):
    """
    Next-token training on the train split (labeled and unlabeled entries alike). Test perplexity is logged
    every eval_interval iterations, when the checkpoint is refreshed. Divergence raises NonFiniteError
    """
    log = log or get_logger(name="pepCLaSS_LM_Train")
    set_deterministic()
    if corpus.max_seq_length > config.max_seq_length:
        raise ConfigError("Corpus max_seq_length {} exceeds the model's {}".format(corpus.max_seq_length, config.max_seq_length))
    lm = CharLanguageModel(config, corpus.vocabulary)
    log.info("Model: {}".format(lm))
    batches = training_batches(corpus, config.batch_size, upsample_ratio=0, seed=config.seed)
    test = corpus.sequences("test") or corpus.sequences("heldout")

    records = []
    running = Counter()
    log_fp = None
    if log_fn:
        mkbasedir(log_fn, exist_ok=True)
        log_fp = open(log_fn, "w")
    try:
        for it in trange(config.iterations, desc="\tProgress", unit=" iterations", disable=not progress):
            lm.params.zero_grad()
            loss = lm.loss(next(batches))
            if not torch.isfinite(loss):
                raise NonFiniteError("Non-finite language model loss at iteration {}".format(it))
            loss.backward()
            clip_grad_norm(lm.params, config.clip_norm)
            adam_update(lm.params, lr=config.lr)
            running["loss"] += float(loss)
            running["n"] += 1

            if (it + 1) % config.eval_interval == 0 or it + 1 == config.iterations:
                rec = OrderedDict([("iter", it + 1), ("train_nll", running["loss"] / running["n"])])
                rec["test_ppl"] = lm.corpus_perplexity(test) if test else None
                records.append(rec)
                running = Counter()
                if log_fp:
                    log_fp.write(json.dumps(rec) + "\n")
                    log_fp.flush()
                log.debug("Iteration {}: train NLL {:.4f} test PPL {}".format(rec["iter"], rec["train_nll"], rec["test_ppl"]))
                lm.save(checkpoint_fn, prov=prov, iterations_done=it + 1)
    except NonFiniteError:
        log.error("Training diverged. Last good checkpoint kept at {}".format(checkpoint_fn))
        raise
    finally:
        if log_fp:
            log_fp.close()
    return lm, records
