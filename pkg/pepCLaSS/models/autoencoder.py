# -*- coding: utf-8 -*-

"""
Recurrent sequence autoencoder: bidirectional GRU encoder with a Gaussian head, GRU decoder conditioned on z
at every step. Trained either as a beta-VAE (KL to the prior) or as a WAE (random feature MMD between the
aggregated posterior and the prior, plus a log-variance penalty).
"""

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
import json
from collections import OrderedDict, namedtuple, Counter

# Third party imports
import numpy as np
import torch
import torch.nn.functional as F
from tqdm import tqdm, trange
from nltk.translate.bleu_score import corpus_bleu

# Local imports
from pepCLaSS.common import *
from pepCLaSS.corpus import Vocabulary, PAD, SOS, EOS, UNK, SPECIAL_TOKENS, training_batches
from pepCLaSS.models.tensor_core import *

# ~~~~~~~~~~~~~~TYPES~~~~~~~~~~~~~~#

GaussianPosterior = namedtuple("GaussianPosterior", ["mu", "logvar"])

OBJECTIVES = ("WAE", "betaVAE")


class AeConfig:
    def __init__(
        self,
        objective: str = "WAE",
        beta_start: float = 0.0,
        beta_end: float = 0.03,
        anneal_fraction: float = 0.1,
        mmd_sigma: float = 7.0,
        mmd_feature_count: int = 512,
        logvar_reg_weight: float = 1e-3,
        word_dropout: float = 0.3,
        embedding_size: int = 50,
        hidden_size: int = 80,
        latent_dim: int = 100,
        lr: float = 1e-3,
        iterations: int = 200000,
        batch_size: int = 32,
        beam_size: int = 5,
        max_seq_length: int = 25,
        clip_norm: float = 5.0,
        eval_interval: int = 1000,
        upsample_ratio: float = 20,
        precision: str = "float64",
        logvar_min: float = -20.0,
        logvar_max: float = 2.0,
        seed: int = 0,
    ):
        """
        Autoencoder hyperparameters
        * objective
            WAE or betaVAE
        * beta_start
            KL weight at iteration 0 (betaVAE)
        * beta_end
            KL weight after annealing (betaVAE)
        * anneal_fraction
            Fraction of the iterations over which beta grows linearly
        * mmd_sigma
            Bandwidth of the gaussian kernel approximated by the MMD random features (WAE)
        * mmd_feature_count
            Number of random Fourier features (WAE)
        * logvar_reg_weight
            Weight of the mean(logvar^2) penalty (WAE)
        * word_dropout
            Probability of replacing a decoder input token by UNK during training
        * embedding_size
            Token embedding size
        * hidden_size
            GRU hidden size, per direction for the encoder
        * latent_dim
            Dimension D of the latent space
        * lr
            Adam learning rate
        * iterations
            Number of training minibatches
        * batch_size
            Minibatch size
        * beam_size
            Beam width used for decoding
        * max_seq_length
            Longest decodable sequence
        * clip_norm
            Global gradient norm cap (0 to disable)
        * eval_interval
            Iterations between log records and checkpoints
        * upsample_ratio
            Unlabeled entries drawn per labeled entry in training batches
        * precision
            float64 or float32
        * seed
            Seed of parameters init, batch order, noise and word dropout
        """
        self.objective = objective
        self.beta_start = beta_start
        self.beta_end = beta_end
        self.anneal_fraction = anneal_fraction
        self.mmd_sigma = mmd_sigma
        self.mmd_feature_count = mmd_feature_count
        self.logvar_reg_weight = logvar_reg_weight
        self.word_dropout = word_dropout
        self.embedding_size = embedding_size
        self.hidden_size = hidden_size
        self.latent_dim = latent_dim
        self.lr = lr
        self.iterations = iterations
        self.batch_size = batch_size
        self.beam_size = beam_size
        self.max_seq_length = max_seq_length
        self.clip_norm = clip_norm
        self.eval_interval = eval_interval
        self.upsample_ratio = upsample_ratio
        self.precision = precision
        self.logvar_min = logvar_min
        self.logvar_max = logvar_max
        self.seed = seed
        self.validate()

    def __repr__(self):
        return "AeConfig({})".format(", ".join("{}={}".format(k, v) for k, v in self.to_dict().items()))

    def __eq__(self, other):
        return isinstance(other, AeConfig) and self.to_dict() == other.to_dict()

    def validate(self):
        if self.objective not in OBJECTIVES:
            raise ConfigError("Invalid objective `{}`. Valid values: {}".format(self.objective, ", ".join(OBJECTIVES)))
        if not 0 <= self.word_dropout <= 1:
            raise ConfigError("word_dropout must be a probability")
        if not 0 <= self.anneal_fraction <= 1:
            raise ConfigError("anneal_fraction must be in [0, 1]")
        for name in ("embedding_size", "hidden_size", "latent_dim", "iterations", "batch_size", "beam_size", "max_seq_length", "mmd_feature_count", "eval_interval"):
            if getattr(self, name) < 1:
                raise ConfigError("{} must be positive".format(name))
        if self.mmd_sigma <= 0:
            raise ConfigError("mmd_sigma must be positive")
        if self.beta_start < 0 or self.beta_end < 0:
            raise ConfigError("beta values must be non negative")
        get_dtype(self.precision)

    def to_dict(self):
        return OrderedDict((k, getattr(self, k)) for k in make_arg_dict(AeConfig) if k not in ("kwargs",))

    @classmethod
    def from_dict(cls, d):
        valid = make_arg_dict(cls)
        return cls(**{k: v for k, v in d.items() if k in valid})


def kl_beta(iteration, config):
    """Linear KL weight annealing from beta_start to beta_end over the first anneal_fraction of the iterations"""
    anneal_steps = config.anneal_fraction * config.iterations
    if anneal_steps <= 0:
        return config.beta_end
    frac = min(1.0, iteration / anneal_steps)
    return config.beta_start + (config.beta_end - config.beta_start) * frac


def kl_divergence(mu, logvar):
    """Per-sample closed form KL(N(mu, exp(logvar)) || N(0, I))"""
    return 0.5 * (mu ** 2 + logvar.exp() - 1.0 - logvar).sum(dim=-1)


def mmd_rff(z_q, z_p, sigma=7.0, feature_count=512, seed=0):
    """
    Squared MMD between two point sets under the gaussian kernel exp(-|x-y|^2 / 2 sigma^2), approximated with
    random Fourier features: |mean phi(z_q) - mean phi(z_p)|^2, phi(z) = sqrt(2/F) cos(z W + b),
    W ~ N(0, 1/sigma^2), b ~ U(0, 2 pi). Differentiable with respect to torch inputs
    """
    z_q = torch.as_tensor(z_q)
    z_p = torch.as_tensor(z_p, dtype=z_q.dtype)
    if z_q.ndim == 1:
        z_q = z_q.unsqueeze(1)
        z_p = z_p.unsqueeze(1)
    if len(z_q) == 0 or len(z_p) == 0:
        raise DataError("mmd_rff needs two non empty point sets")
    if sigma <= 0:
        raise ConfigError("sigma must be positive")
    g = torch.Generator().manual_seed(int(seed))
    D = z_q.shape[1]
    W = (torch.randn(D, feature_count, generator=g, dtype=torch.float64) / sigma).to(z_q.dtype)
    b = (torch.rand(feature_count, generator=g, dtype=torch.float64) * 2 * np.pi).to(z_q.dtype)
    scale = np.sqrt(2.0 / feature_count)
    phi_q = scale * torch.cos(z_q @ W + b)
    phi_p = scale * torch.cos(z_p @ W + b)
    diff = phi_q.mean(dim=0) - phi_p.mean(dim=0)
    return (diff ** 2).sum()


def word_dropout(inputs, p, generator):
    """Replace decoder input residues (not SOS, EOS or PAD) by UNK with probability p"""
    if p <= 0:
        return inputs
    droppable = (inputs != PAD) & (inputs != SOS) & (inputs != EOS)
    drop = torch.rand(inputs.shape, generator=generator, dtype=torch.float64) < p
    return torch.where(droppable & drop, torch.full_like(inputs, UNK), inputs)


def sample_posterior(posterior, rng):
    """Reparameterized draw z = mu + exp(logvar/2) * eps"""
    mu = np.asarray(posterior.mu, dtype=np.float64)
    logvar = np.asarray(posterior.logvar, dtype=np.float64)
    return mu + np.exp(logvar / 2) * rng.standard_normal(mu.shape)


def bleu_corpus(references, hypotheses):
    """Corpus-level BLEU at residue level, uniform weights up to 4-grams, with brevity penalty"""
    if len(references) != len(hypotheses):
        raise DataError("BLEU needs as many references as hypotheses")
    if not references:
        return 0.0
    refs = [[list(r)] for r in references]
    hyps = [list(h) for h in hypotheses]
    return float(corpus_bleu(refs, hyps, weights=(0.25, 0.25, 0.25, 0.25)))


# ~~~~~~~~~~~~~~MODEL~~~~~~~~~~~~~~#


class SequenceAutoencoder:
    def __init__(self, config=None, vocabulary=None, params=None):
        """
        * config
            AeConfig
        * vocabulary
            Token table shared with the corpus
        * params
            Existing ParameterSet (checkpoint loading). Fresh Glorot init otherwise
        """
        self.config = config or AeConfig()
        self.vocabulary = vocabulary or Vocabulary()
        self.dtype = get_dtype(self.config.precision)
        V, E, H, D = len(self.vocabulary), self.config.embedding_size, self.config.hidden_size, self.config.latent_dim

        if params is None:
            params = ParameterSet(seed=self.config.seed, dtype=self.dtype)
            params.init_matrix("embedding", (V, E))
            init_rnn(params, "enc", E, H, cell="gru", direction="bidirectional")
            params.init_matrix("enc.mu.weight", (D, 2 * H))
            params.init_zeros("enc.mu.bias", (D,))
            params.init_matrix("enc.logvar.weight", (D, 2 * H))
            params.init_zeros("enc.logvar.bias", (D,))
            params.init_matrix("dec.z2h.weight", (H, D))
            params.init_zeros("dec.z2h.bias", (H,))
            init_rnn(params, "dec", E + D, H, cell="gru", direction="forward")
            params.init_matrix("dec.out.weight", (V, H))
            params.init_zeros("dec.out.bias", (V,))
        else:
            params.check_shape("embedding", (V, E))
            params.check_shape("enc.mu.weight", (D, 2 * H))
            params.check_shape("dec.out.weight", (V, H))
        self.params = params
        # Decoder never emits these
        self.forbidden = [PAD, SOS, UNK]

    def __repr__(self):
        return "SequenceAutoencoder({}, D={}, {})".format(self.config.objective, self.config.latent_dim, self.params)

    @property
    def latent_dim(self):
        return self.config.latent_dim

    # ~~~~~~~~~~~~~~ENCODER~~~~~~~~~~~~~~#

    def tokens(self, sequences):
        return torch.as_tensor(self.vocabulary.tokenize_batch(list(sequences), self.config.max_seq_length))

    def posterior_tensors(self, tokens):
        """(mu, logvar) tensors for a token batch, logvar clamped to [logvar_min, logvar_max]"""
        p = self.params
        _, finals = gru_forward(p, tokens, "bidirectional", self.config.hidden_size, prefix="enc", embedding_name="embedding")
        h = torch.cat([finals[0], finals[1]], dim=-1)
        mu = linear(h, p["enc.mu.weight"], p["enc.mu.bias"])
        logvar = linear(h, p["enc.logvar.weight"], p["enc.logvar.bias"]).clamp(self.config.logvar_min, self.config.logvar_max)
        return mu, logvar

    def encode(self, sequence):
        mu, logvar = self.encode_batch([sequence])
        return GaussianPosterior(mu[0], logvar[0])

    def encode_batch(self, sequences, chunk_size=256):
        """Posterior parameters as two (N, D) float64 arrays"""
        sequences = list(sequences)
        mus, logvars = [], []
        with torch.no_grad():
            for i in range(0, len(sequences), chunk_size):
                mu, logvar = self.posterior_tensors(self.tokens(sequences[i : i + chunk_size]))
                mus.append(mu.to(torch.float64).numpy())
                logvars.append(logvar.to(torch.float64).numpy())
        if not mus:
            return np.zeros((0, self.latent_dim)), np.zeros((0, self.latent_dim))
        return np.concatenate(mus), np.concatenate(logvars)

    # ~~~~~~~~~~~~~~DECODER~~~~~~~~~~~~~~#

    def _init_hidden(self, z):
        return torch.tanh(linear(z, self.params["dec.z2h.weight"], self.params["dec.z2h.bias"]))

    def decoder_logits(self, z, inputs):
        """Logits (B, T, V) with the reference tokens (B, T) fed as decoder inputs"""
        p = self.params
        emb = embedding(p, "embedding", inputs)
        x = torch.cat([emb, z.unsqueeze(1).expand(-1, inputs.shape[1], -1)], dim=-1)
        out, _ = gru_forward(p, x, "forward", self.config.hidden_size, prefix="dec", h0=self._init_hidden(z).unsqueeze(0))
        return linear(out, p["dec.out.weight"], p["dec.out.bias"])

    def _step(self, last_tokens, h, z):
        p = self.params
        x = torch.cat([embedding(p, "embedding", last_tokens), z], dim=-1)
        h = gru_cell(x, h, p["dec.fwd.w_ih"], p["dec.fwd.w_hh"], p["dec.fwd.b_ih"], p["dec.fwd.b_hh"])
        logp = F.log_softmax(linear(h, p["dec.out.weight"], p["dec.out.bias"]), dim=-1)
        return logp.to(torch.float64).numpy().copy(), h

    def _mask_logp(self, logp, n_residues):
        logp[:, self.forbidden] = -np.inf
        if n_residues >= self.config.max_seq_length:
            keep = logp[:, EOS].copy()
            logp[:, :] = -np.inf
            logp[:, EOS] = keep
        elif n_residues == 0:
            logp[:, EOS] = -np.inf
        return logp

    def decode_greedy(self, Z):
        """Argmax decoding of a batch of latent points (N, D). Returns a list of sequences"""
        Z = torch.as_tensor(np.atleast_2d(np.asarray(Z, dtype=np.float64)), dtype=self.dtype)
        N = len(Z)
        out = np.full((N, self.config.max_seq_length + 1), PAD, dtype=np.int64)
        done = np.zeros(N, dtype=bool)
        with torch.no_grad():
            h = self._init_hidden(Z)
            last = torch.full((N,), SOS, dtype=torch.long)
            for t in range(self.config.max_seq_length + 1):
                logp, h = self._step(last, h, Z)
                logp = self._mask_logp(logp, t)
                tok = np.argmax(logp, axis=1)
                tok[done] = PAD
                out[:, t] = tok
                done |= tok == EOS
                if done.all():
                    break
                last = torch.as_tensor(tok)
        return [self.vocabulary.detokenize(row) for row in out]

    def beam_search(self, z, beam_size=None):
        """
        Beam search for one latent point. Candidates are ranked by cumulative log-probability, ties broken by
        beam index then token id. Search stops when the best finished hypothesis scores at least as well as
        every live one. Returns (token ids without framing, log-probability including EOS)
        """
        beam_size = beam_size or self.config.beam_size
        if beam_size < 1:
            raise ConfigError("beam_size must be >= 1")
        z = torch.as_tensor(np.asarray(z, dtype=np.float64).reshape(1, -1), dtype=self.dtype)
        V = len(self.vocabulary)
        hyps = [[]]
        scores = np.zeros(1)
        finished = []

        with torch.no_grad():
            h = self._init_hidden(z)
            last = [SOS]
            for t in range(self.config.max_seq_length + 1):
                logp, h_new = self._step(torch.as_tensor(last, dtype=torch.long), h, z.expand(len(hyps), -1))
                cand = (scores[:, None] + self._mask_logp(logp, t)).ravel()
                order = np.lexsort((np.arange(cand.size), -cand))

                live_hyps, live_scores, parents = [], [], []
                for rank, idx in enumerate(order):
                    if not np.isfinite(cand[idx]) or len(live_hyps) == beam_size:
                        break
                    b, tok = divmod(int(idx), V)
                    if tok == EOS:
                        if rank < beam_size:
                            finished.append((cand[idx], hyps[b]))
                        continue
                    live_hyps.append(hyps[b] + [tok])
                    live_scores.append(cand[idx])
                    parents.append(b)

                if not live_hyps:
                    break
                best_finished = max((s for s, _ in finished), default=-np.inf)
                if best_finished >= max(live_scores):
                    break
                hyps, scores = live_hyps, np.array(live_scores)
                h = h_new[torch.as_tensor(parents, dtype=torch.long)]
                last = [hh[-1] for hh in hyps]

        if beam_size > 1:
            # The greedy path always competes
            g_ids, g_score = self.beam_search(z.numpy()[0], beam_size=1)
            finished.append((g_score, g_ids))
        best_score, best = finished[0]
        for s, ids in finished[1:]:
            if s > best_score:
                best_score, best = s, ids
        return list(best), float(best_score)

    def decode_beam(self, z, beam_size=None):
        ids, _ = self.beam_search(z, beam_size)
        return self.vocabulary.detokenize(ids)

    def decode(self, Z, beam_size=None, progress=False):
        """Decode a batch of latent points with beam search (greedy when beam_size == 1)"""
        beam_size = beam_size or self.config.beam_size
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        if beam_size == 1:
            return self.decode_greedy(Z)
        return [self.decode_beam(z, beam_size) for z in tqdm(Z, desc="\tDecoding", disable=not progress)]

    def reconstruct(self, sequences, beam_size=None):
        """Beam decode of the posterior means"""
        mu, _ = self.encode_batch(sequences)
        return self.decode(mu, beam_size)

    def sequence_logprob(self, z, sequence):
        """log p(x|z) of a full framed sequence (EOS included)"""
        tokens = self.tokens([sequence])
        z = torch.as_tensor(np.asarray(z, dtype=np.float64).reshape(1, -1), dtype=self.dtype)
        with torch.no_grad():
            logits = self.decoder_logits(z, tokens[:, :-1])
            return -float(masked_cross_entropy(logits, tokens[:, 1:], reduction="sum"))

    # ~~~~~~~~~~~~~~LOSSES~~~~~~~~~~~~~~#

    def recon_nll(self, z, tokens, dropout_p=0.0, generator=None):
        """Per-token cross-entropy over non-PAD targets, reference tokens as decoder inputs"""
        inputs, targets = tokens[:, :-1], tokens[:, 1:]
        if dropout_p > 0:
            inputs = word_dropout(inputs, dropout_p, generator)
        return masked_cross_entropy(self.decoder_logits(z, inputs), targets)

    def _reparameterize(self, mu, logvar, generator):
        eps = torch.randn(mu.shape, generator=generator, dtype=torch.float64).to(mu.dtype)
        return mu + (logvar / 2).exp() * eps

    def loss_vae(self, tokens, beta, generator=None, dropout_p=None):
        """Returns (total, recon_nll, kl) with kl averaged over the batch"""
        if beta < 0:
            raise ConfigError("beta must be non negative")
        generator = generator or torch.Generator().manual_seed(self.config.seed)
        dropout_p = self.config.word_dropout if dropout_p is None else dropout_p
        tokens = torch.as_tensor(tokens)
        mu, logvar = self.posterior_tensors(tokens)
        z = self._reparameterize(mu, logvar, generator)
        recon = self.recon_nll(z, tokens, dropout_p, generator)
        kl = kl_divergence(mu, logvar).mean()
        total = recon + beta * kl
        _check_finite(total)
        return total, recon, kl

    def loss_wae(self, tokens, prior_samples=None, generator=None, dropout_p=None, mmd_seed=None):
        """Returns (total, recon_nll, mmd, logvar_penalty)"""
        cfg = self.config
        generator = generator or torch.Generator().manual_seed(cfg.seed)
        dropout_p = cfg.word_dropout if dropout_p is None else dropout_p
        tokens = torch.as_tensor(tokens)
        mu, logvar = self.posterior_tensors(tokens)
        z = self._reparameterize(mu, logvar, generator)
        if prior_samples is None:
            prior_samples = torch.randn(z.shape, generator=generator, dtype=torch.float64)
        prior_samples = torch.as_tensor(prior_samples).to(z.dtype)
        if prior_samples.shape != z.shape:
            raise DataError("Prior sample batch {} does not match posterior batch {}".format(tuple(prior_samples.shape), tuple(z.shape)))
        recon = self.recon_nll(z, tokens, dropout_p, generator)
        mmd = mmd_rff(z, prior_samples, cfg.mmd_sigma, cfg.mmd_feature_count, seed=cfg.seed if mmd_seed is None else mmd_seed)
        penalty = (logvar ** 2).mean()
        total = recon + mmd
        if cfg.logvar_reg_weight:
            total = total + cfg.logvar_reg_weight * penalty
        _check_finite(total)
        return total, recon, mmd, penalty

    # ~~~~~~~~~~~~~~PERSISTENCE~~~~~~~~~~~~~~#

    def save(self, fn, prov=None, **extra):
        metadata = OrderedDict()
        metadata["kind"] = "autoencoder"
        metadata["config"] = self.config.to_dict()
        metadata["vocabulary"] = self.vocabulary.to_list()
        metadata["provenance"] = prov
        metadata.update(extra)
        save_checkpoint(fn, self.params.to_arrays(), metadata)

    @classmethod
    def load(cls, fn):
        tensors, metadata = load_checkpoint(fn, expected_kind="autoencoder")
        config = AeConfig.from_dict(metadata["config"])
        params = ParameterSet.from_arrays(tensors, dtype=get_dtype(config.precision), seed=config.seed)
        model = cls(config, Vocabulary(metadata["vocabulary"]), params=params)
        model.metadata = metadata
        return model


def _check_finite(loss):
    if not torch.isfinite(loss):
        raise NonFiniteError("Non-finite training loss")


def sample_prior(model, count, rng, beam_size=None):
    """Decode `count` draws from N(0, I)"""
    Z = rng.standard_normal((count, model.latent_dim))
    return model.decode(Z, beam_size)


# ~~~~~~~~~~~~~~TRAINING~~~~~~~~~~~~~~#


def train(corpus, config, checkpoint_fn, log_fn=None, prov=None, progress=False, log=None, heldout_size=256):
    """
    Train an autoencoder on the train split of a corpus. A line-delimited JSON record is written and the
    checkpoint is refreshed every eval_interval iterations. A non-finite loss or gradient raises
    NonFiniteError and leaves the last good checkpoint in place.
    Returns the trained model and the list of log records
    """
    log = log or get_logger(name="pepCLaSS_AE_Train")
    set_deterministic()
    if corpus.max_seq_length > config.max_seq_length:
        raise ConfigError("Corpus max_seq_length {} exceeds the model's {}".format(corpus.max_seq_length, config.max_seq_length))

    model = SequenceAutoencoder(config, corpus.vocabulary)
    log.info("Model: {}".format(model))
    upsample_ratio = config.upsample_ratio
    train_entries = corpus.split("train")
    if upsample_ratio and (all(e.labels for e in train_entries) or not any(e.labels for e in train_entries)):
        log.info("Labeled/unlabeled mix not available in train split, sampling uniformly")
        upsample_ratio = 0
    batches = training_batches(corpus, config.batch_size, upsample_ratio, seed=config.seed)

    heldout = corpus.sequences("heldout")[:heldout_size] or corpus.sequences("train")[:heldout_size]
    heldout_tokens = model.tokens(heldout)
    generator = torch.Generator().manual_seed(config.seed + 1)

    records = []
    interval = Counter()
    log_fp = None
    if log_fn:
        mkbasedir(log_fn, exist_ok=True)
        log_fp = open(log_fn, "w")
    try:
        for it in trange(config.iterations, desc="\tProgress", unit=" iterations", disable=not progress):
            tokens = torch.as_tensor(next(batches))
            model.params.zero_grad()
            if config.objective == "betaVAE":
                beta = kl_beta(it, config)
                total, recon, constraint = model.loss_vae(tokens, beta, generator)
            else:
                beta = None
                total, recon, mmd, penalty = model.loss_wae(tokens, generator=generator, mmd_seed=config.seed + it)
                constraint = mmd + config.logvar_reg_weight * penalty
            total.backward()
            grad_norm = clip_grad_norm(model.params, config.clip_norm)
            adam_update(model.params, lr=config.lr)

            interval["recon"] += float(recon)
            interval["constraint"] += float(constraint)
            interval["total"] += float(total)
            interval["n"] += 1

            if (it + 1) % config.eval_interval == 0 or it + 1 == config.iterations:
                rec = OrderedDict()
                rec["iter"] = it + 1
                for key in ("recon", "constraint", "total"):
                    rec[key] = interval[key] / interval["n"]
                if beta is not None:
                    rec["beta"] = beta
                rec["grad_norm"] = grad_norm
                rec.update(_heldout_metrics(model, heldout_tokens))
                records.append(rec)
                interval = Counter()
                if log_fp:
                    log_fp.write(json.dumps(rec) + "\n")
                    log_fp.flush()
                log.debug("Iteration {iter}: recon {recon:.4f} constraint {constraint:.4f} heldout recon {heldout_recon:.4f}".format(**rec))
                model.save(checkpoint_fn, prov=prov, iterations_done=it + 1)

    except NonFiniteError:
        log.error("Training diverged. Last good checkpoint kept at {}".format(checkpoint_fn))
        raise
    finally:
        if log_fp:
            log_fp.close()
    return model, records


def _heldout_metrics(model, tokens):
    if len(tokens) == 0:
        return OrderedDict([("heldout_recon", float("nan")), ("kl_per_dim", float("nan"))])
    with torch.no_grad():
        mu, logvar = model.posterior_tensors(tokens)
        recon = model.recon_nll(mu, tokens)
        kl = kl_divergence(mu, logvar).mean()
    d = OrderedDict()
    d["heldout_recon"] = float(recon)
    d["kl_per_dim"] = float(kl) / model.latent_dim
    return d


# ~~~~~~~~~~~~~~EVALUATION~~~~~~~~~~~~~~#


def evaluate(model, heldout, lm=None, sample_count=500, seed=0, beam_size=None, progress=False):
    """
    Evaluation panel on held-out sequences:
    heldout per-token reconstruction NLL at the posterior mean, corpus BLEU of beam reconstructions,
    L2 norm of the mean encoder log-variance, mean KL per dimension, and when a language model is given
    the perplexity of prior samples and of the reconstructions
    """
    heldout = list(heldout)
    if not heldout:
        raise DataError("Empty held-out set")
    tokens = model.tokens(heldout)
    with torch.no_grad():
        mu, logvar = model.posterior_tensors(tokens)
        recon = float(model.recon_nll(mu, tokens))
        kl = float(kl_divergence(mu, logvar).mean())

    recons = model.decode(mu.to(torch.float64).numpy(), beam_size, progress=progress)
    d = OrderedDict()
    d["recon_nll"] = recon
    d["recon_units"] = "nats per token"
    d["bleu"] = bleu_corpus(heldout, recons)
    d["exact_reconstruction"] = float(np.mean([a == b for a, b in zip(heldout, recons)]))
    d["encoder_logvar_norm"] = float(np.linalg.norm(logvar.to(torch.float64).numpy().mean(axis=0)))
    d["kl_per_dim"] = kl / model.latent_dim
    d["ppl_prior"] = None
    d["ppl_heldout_recon"] = None
    if lm is not None:
        rng = np.random.default_rng(seed)
        prior_seqs = sample_prior(model, sample_count, rng, beam_size)
        d["ppl_prior"] = float(np.mean(lm.perplexity_batch(prior_seqs)))
        d["ppl_heldout_recon"] = float(np.mean(lm.perplexity_batch(recons)))
    return d
