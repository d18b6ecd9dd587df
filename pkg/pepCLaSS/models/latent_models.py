# -*- coding: utf-8 -*-

"""
Explicit models of the latent space: a diagonal Gaussian mixture fitted by EM on encoded training data, and
one L2 regularized logistic regression per attribute.
"""

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
from collections import OrderedDict, namedtuple

# Third party imports
import numpy as np
import scipy.optimize
from scipy.special import logsumexp, expit
from tqdm import trange

# Local imports
from pepCLaSS.common import *
from pepCLaSS.corpus import ATTRIBUTES, canonical_attribute
from pepCLaSS.models.tensor_core import save_checkpoint, load_checkpoint

# ~~~~~~~~~~~~~~CONSTANTS~~~~~~~~~~~~~~#
LOG_2PI = np.log(2 * np.pi)
DEGENERATE_MASS = 1e-8

LatentDataset = namedtuple("LatentDataset", ["Z", "seq_index", "sequences", "labels"])

# ~~~~~~~~~~~~~~EMBEDDING~~~~~~~~~~~~~~#


def encode_means(model, sequences):
    mu, _ = model.encode_batch(sequences)
    return mu


def embed_corpus(model, corpus, samples_per_seq=10, seed=0, split="train"):
    """
    Draw samples_per_seq posterior samples for each sequence of a split. Every draw carries the labels of its
    source sequence (-1 where the attribute is not labeled)
    """
    entries = corpus.split(split) if split else list(corpus)
    if not entries:
        raise DataError("No {} entries to embed".format(split))
    if samples_per_seq < 1:
        raise ConfigError("samples_per_seq must be >= 1")
    sequences = [e.sequence for e in entries]
    mu, logvar = model.encode_batch(sequences)
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((len(sequences), samples_per_seq, mu.shape[1]))
    Z = (mu[:, None, :] + np.exp(logvar / 2)[:, None, :] * eps).reshape(-1, mu.shape[1])
    seq_index = np.repeat(np.arange(len(sequences)), samples_per_seq)

    labels = OrderedDict()
    for attribute in corpus.attributes:
        per_seq = np.array([e.labels.get(attribute, -1) for e in entries], dtype=np.int64)
        labels[attribute] = per_seq[seq_index]
    return LatentDataset(Z, seq_index, sequences, labels)


def save_latents(fn, dataset, prov=None):
    tensors = OrderedDict([("Z", dataset.Z), ("seq_index", dataset.seq_index.astype(np.float64))])
    for attribute, y in dataset.labels.items():
        tensors["label." + attribute] = y.astype(np.float64)
    metadata = OrderedDict([("kind", "latents"), ("sequences", dataset.sequences), ("provenance", prov)])
    save_checkpoint(fn, tensors, metadata)


def load_latents(fn):
    tensors, metadata = load_checkpoint(fn, expected_kind="latents")
    labels = OrderedDict()
    for name, a in tensors.items():
        if name.startswith("label."):
            labels[name[6:]] = a.astype(np.int64)
    dataset = LatentDataset(tensors["Z"], tensors["seq_index"].astype(np.int64), metadata["sequences"], labels)
    return dataset, metadata


# ~~~~~~~~~~~~~~GAUSSIAN MIXTURE~~~~~~~~~~~~~~#


class MixtureDensity:
    def __init__(self, weights, means, diag_vars, var_floor=1e-4):
        """
        Gaussian mixture with untied diagonal covariances
        * weights
            K mixing weights summing to 1
        * means
            K x D component means
        * diag_vars
            K x D component variances, floored at var_floor
        """
        self.weights = np.asarray(weights, dtype=np.float64)
        self.means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        self.diag_vars = np.maximum(np.atleast_2d(np.asarray(diag_vars, dtype=np.float64)), var_floor)
        self.var_floor = var_floor
        self.history = []
        self.converged = None
        if self.means.shape != self.diag_vars.shape or len(self.weights) != len(self.means):
            raise ModelError("Inconsistent mixture shapes")
        if abs(self.weights.sum() - 1) > 1e-12:
            self.weights = self.weights / self.weights.sum()

    def __repr__(self):
        return "MixtureDensity(K={}, D={})".format(self.component_count, self.dim)

    @property
    def component_count(self):
        return len(self.weights)

    @property
    def dim(self):
        return self.means.shape[1]

    def component_logpdf(self, Z):
        """(N, K) log N(z | mean_k, diag var_k)"""
        Z = np.atleast_2d(Z)
        if Z.shape[1] != self.dim:
            raise DataError("Latent dimension {} does not match the mixture ({})".format(Z.shape[1], self.dim))
        inv = 1.0 / self.diag_vars
        maha = (Z ** 2) @ inv.T - 2 * Z @ (self.means * inv).T + (self.means ** 2 * inv).sum(axis=1)
        maha = np.maximum(maha, 0)
        return -0.5 * (self.dim * LOG_2PI + np.log(self.diag_vars).sum(axis=1) + maha)

    def logpdf(self, Z):
        return logsumexp(self.component_logpdf(Z) + np.log(self.weights), axis=1)

    def sample(self, n, rng):
        """Categorical component draw then diagonal gaussian draw. Returns (n, D) and the component ids"""
        comp = rng.choice(self.component_count, size=n, p=self.weights)
        Z = self.means[comp] + np.sqrt(self.diag_vars[comp]) * rng.standard_normal((n, self.dim))
        return Z, comp

    def to_arrays(self):
        return OrderedDict([("weights", self.weights), ("means", self.means), ("diag_vars", self.diag_vars)])

    def save(self, fn, prov=None, **extra):
        metadata = OrderedDict([("kind", "gmm"), ("var_floor", self.var_floor), ("history", self.history), ("provenance", prov)])
        metadata.update(extra)
        save_checkpoint(fn, self.to_arrays(), metadata)

    @classmethod
    def load(cls, fn):
        tensors, metadata = load_checkpoint(fn, expected_kind="gmm")
        gmm = cls(tensors["weights"], tensors["means"], tensors["diag_vars"], var_floor=metadata.get("var_floor", 1e-4))
        gmm.history = metadata.get("history", [])
        gmm.metadata = metadata
        return gmm


def gmm_logpdf(gmm, z):
    """Log density of one point (D,) or of a batch (N, D)"""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        return float(gmm.logpdf(z[None, :])[0])
    return gmm.logpdf(z)


def gmm_sample(gmm, rng, n=None):
    """One latent point, or n of them as an (n, D) array"""
    Z, _ = gmm.sample(1 if n is None else n, rng)
    return Z[0] if n is None else Z


def _kmeans_pp(Z, k, rng):
    centers = [Z[rng.integers(len(Z))]]
    d2 = ((Z - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(len(Z))
        else:
            idx = rng.choice(len(Z), p=d2 / total)
        centers.append(Z[idx])
        d2 = np.minimum(d2, ((Z - Z[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def fit_gmm(latents, component_count, seed=0, heldout=None, var_floor=1e-4, tol=1e-6, max_iter=500, progress=False, log=None):
    """
    EM fit of a diagonal Gaussian mixture with k-means++ seeded means.
    Stops when the relative improvement of the train mean log-likelihood drops below tol or after max_iter
    iterations. A component whose responsibility mass falls below 1e-8 is re-seeded on the worst explained
    point once; a second collapse raises DegenerateComponentError.
    Returns the fitted MixtureDensity (with its per-iteration history) and the heldout mean log-likelihood
    (None without heldout data)
    """
    Z = np.asarray(latents, dtype=np.float64)
    K = int(component_count)
    if K < 1:
        raise ConfigError("component_count must be >= 1")
    if len(Z) < K:
        raise DataError("{} latent points cannot support {} components".format(len(Z), K))
    rng = np.random.default_rng(seed)
    N, D = Z.shape
    global_var = np.maximum(Z.var(axis=0), var_floor)

    gmm = MixtureDensity(np.full(K, 1.0 / K), _kmeans_pp(Z, K, rng), np.tile(global_var, (K, 1)), var_floor)
    reseeded = np.zeros(K, dtype=bool)
    prev_ll = None
    converged = False

    for it in trange(max_iter, desc="\tProgress", unit=" EM iterations", disable=not progress):
        # E-step
        log_joint = gmm.component_logpdf(Z) + np.log(gmm.weights)
        point_ll = logsumexp(log_joint, axis=1)
        train_ll = float(point_ll.mean())
        rec = OrderedDict([("iter", it), ("train_ll", train_ll)])
        rec["heldout_ll"] = float(gmm.logpdf(heldout).mean()) if heldout is not None and len(heldout) else None
        gmm.history.append(rec)
        if prev_ll is not None and abs(train_ll - prev_ll) < tol * abs(prev_ll):
            converged = True
            break
        prev_ll = train_ll
        resp = np.exp(log_joint - point_ll[:, None])

        # M-step
        Nk = resp.sum(axis=0)
        for k in np.flatnonzero(Nk < DEGENERATE_MASS):
            if reseeded[k]:
                raise DegenerateComponentError("Component {} collapsed twice during EM".format(k))
            reseeded[k] = True
            worst = int(np.argmin(point_ll))
            if log:
                log.debug("Re-seeding degenerate component {} at iteration {}".format(k, it))
            resp[:, k] = 0
            resp[worst, :] = 0
            resp[worst, k] = 1
            Nk = resp.sum(axis=0)
        Nk_safe = np.maximum(Nk, np.finfo(float).tiny)
        means = (resp.T @ Z) / Nk_safe[:, None]
        second = (resp.T @ (Z ** 2)) / Nk_safe[:, None]
        gmm.means = means
        gmm.diag_vars = np.maximum(second - means ** 2, var_floor)
        gmm.weights = Nk / N

    gmm.converged = converged
    heldout_ll = gmm.history[-1]["heldout_ll"]
    return gmm, heldout_ll


def gmm_select(latents, candidates=(1, 2, 4, 8), seed=0, heldout=None, **kwargs):
    """
    Fit one mixture per candidate component count and keep the best heldout log-likelihood
    (train log-likelihood when no heldout set is given). Returns the best mixture and the comparison table
    """
    if not candidates:
        raise ConfigError("No candidate component count")
    table = []
    best, best_score = None, -np.inf
    for K in candidates:
        gmm, heldout_ll = fit_gmm(latents, K, seed=seed, heldout=heldout, **kwargs)
        score = heldout_ll if heldout_ll is not None else gmm.history[-1]["train_ll"]
        table.append(OrderedDict([("component_count", K), ("train_ll", gmm.history[-1]["train_ll"]), ("heldout_ll", heldout_ll)]))
        if score > best_score:
            best, best_score = gmm, score
    return best, table


# ~~~~~~~~~~~~~~LATENT CLASSIFIERS~~~~~~~~~~~~~~#


class LatentClassifier:
    def __init__(self, attribute, weights, bias):
        """Logistic regression q(a=1|z) = sigmoid(w.z + b)"""
        self.attribute = canonical_attribute(attribute)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.bias = float(bias)
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias)):
            raise ModelError("Non-finite parameters for the {} classifier".format(self.attribute))

    def __repr__(self):
        return "LatentClassifier({}, D={})".format(self.attribute, len(self.weights))

    def logit(self, Z):
        Z = np.asarray(Z, dtype=np.float64)
        if Z.shape[-1] != len(self.weights):
            raise DataError("Latent dimension {} does not match the {} classifier ({})".format(Z.shape[-1], self.attribute, len(self.weights)))
        return Z @ self.weights + self.bias

    def prob(self, Z, value=1):
        p = expit(self.logit(Z))
        return p if value == 1 else 1.0 - p


def classifier_prob(clf, z, value=1):
    """q(a=value|z). Scalar for one point, array for a batch"""
    p = clf.prob(z, value)
    return float(p) if np.ndim(p) == 0 else p


def _logistic_objective(params, X, y, C):
    w, b = params[:-1], params[-1]
    t = X @ w + b
    loss = 0.5 * w @ w + C * (np.logaddexp(0, t) - y * t).sum()
    r = C * (expit(t) - y)
    grad = np.concatenate([w + X.T @ r, [r.sum()]])
    return loss, grad


def fit_latent_classifier(Z, y, attribute, C=1.0, max_iter=300, heldout=None):
    """
    Minimise 0.5 |w|^2 + C sum logloss (bias not penalised) with L-BFGS-B.
    * heldout
        Optional (Z, y) pair for the heldout accuracy
    Returns the classifier and a report with train/heldout accuracy and the majority class baseline
    """
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    keep = y >= 0
    Z, y = Z[keep], y[keep]
    if len(np.unique(y)) < 2:
        raise SingleClassError("The {} labels contain a single class".format(attribute))

    x0 = np.zeros(Z.shape[1] + 1)
    res = scipy.optimize.minimize(
        _logistic_objective, x0, args=(Z, y, C), jac=True, method="L-BFGS-B", options={"maxiter": max_iter, "gtol": 1e-5}
    )
    clf = LatentClassifier(attribute, res.x[:-1], res.x[-1])

    report = OrderedDict()
    report["attribute"] = clf.attribute
    report["n_train"] = len(y)
    report["positive_fraction"] = float(y.mean())
    report["train_accuracy"] = float(((clf.logit(Z) >= 0) == (y == 1)).mean())
    report["majority_baseline"] = float(max(y.mean(), 1 - y.mean()))
    report["grad_norm"] = float(np.abs(res.jac).max())
    report["iterations"] = int(res.nit)
    report["heldout_accuracy"] = None
    if heldout is not None:
        Zh, yh = np.asarray(heldout[0], dtype=np.float64), np.asarray(heldout[1])
        keep = yh >= 0
        if keep.any():
            report["heldout_accuracy"] = float(((clf.logit(Zh[keep]) >= 0) == (yh[keep] == 1)).mean())
    return clf, report


def save_classifiers(fn, classifiers, prov=None, reports=None):
    tensors = OrderedDict()
    for clf in classifiers:
        tensors[clf.attribute + ".weights"] = clf.weights
        tensors[clf.attribute + ".bias"] = np.array(clf.bias)
    metadata = OrderedDict([("kind", "latent_classifiers"), ("attributes", [c.attribute for c in classifiers])])
    metadata["reports"] = reports or []
    metadata["provenance"] = prov
    save_checkpoint(fn, tensors, metadata)


def load_classifiers(fn):
    """Returns an OrderedDict attribute -> LatentClassifier and the checkpoint metadata"""
    tensors, metadata = load_checkpoint(fn, expected_kind="latent_classifiers")
    d = OrderedDict()
    for attribute in metadata["attributes"]:
        d[attribute] = LatentClassifier(attribute, tensors[attribute + ".weights"], float(tensors[attribute + ".bias"]))
    return d, metadata
