# -*- coding: utf-8 -*-

"""Latent space probes: sequence similarity against latent distance, and linear interpolation"""

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
from collections import OrderedDict

# Third party imports
import numpy as np
import pandas as pd
from scipy.stats import pearsonr
from tqdm import tqdm

# Local imports
from pepCLaSS.common import *
from pepCLaSS.analysis.alignment import load_matrix, normalized_similarity
from pepCLaSS.analysis.descriptors import descriptors, DescriptorVector

# ~~~~~~~~~~~~~~FUNCTIONS~~~~~~~~~~~~~~#


def near_neighbor_pairs(mu, pair_count, neighbors, rng):
    """Random anchors, each paired with one of its `neighbors` closest points (itself included)"""
    N = len(mu)
    anchors = rng.integers(0, N, pair_count)
    k = min(neighbors, N)
    pairs = []
    for a in anchors:
        d = np.linalg.norm(mu - mu[a], axis=1)
        order = np.lexsort((np.arange(N), d))[:k]
        pairs.append((int(a), int(order[rng.integers(0, k)])))
    return pairs


def probe_similarity_correlation(model, sequences, pair_count=1000, seed=0, neighbors=10, bootstrap=1000, shuffle=False, progress=False):
    """
    Pearson correlation between normalized global alignment similarity and the Euclidean distance of the
    posterior means, over near neighbor pairs. With shuffle=True the distances are permuted across pairs
    (null model). Returns a summary dict with a 95% bootstrap interval and the pair table
    """
    if pair_count < 10:
        raise ConfigError("pair_count must be >= 10")
    sequences = list(sequences)
    if len(sequences) < 2:
        raise DataError("Need at least two sequences to probe the latent space")
    rng = np.random.default_rng(seed)
    mu, _ = model.encode_batch(sequences)
    matrix = load_matrix()

    rows = []
    for pid, (i, j) in enumerate(tqdm(near_neighbor_pairs(mu, pair_count, neighbors, rng), desc="\tProgress", disable=not progress)):
        rows.append(
            [pid, sequences[i], sequences[j], normalized_similarity(sequences[i], sequences[j], matrix), float(np.linalg.norm(mu[i] - mu[j]))]
        )
    df = pd.DataFrame(rows, columns=["pair_id", "sequence_a", "sequence_b", "similarity", "distance"])
    sim = df["similarity"].values
    dist = df["distance"].values
    if shuffle:
        dist = rng.permutation(dist)
        df["distance"] = dist

    d = OrderedDict()
    d["pair_count"] = len(df)
    d["r"] = float(pearsonr(sim, dist)[0]) if np.std(sim) > 0 and np.std(dist) > 0 else float("nan")
    boot = []
    for _ in range(bootstrap):
        idx = rng.integers(0, len(df), len(df))
        if np.std(sim[idx]) > 0 and np.std(dist[idx]) > 0:
            boot.append(pearsonr(sim[idx], dist[idx])[0])
    d["ci_low"], d["ci_high"] = (float(np.percentile(boot, 2.5)), float(np.percentile(boot, 97.5))) if boot else (None, None)
    return d, df


def interpolate(model, z_start, z_end, steps=10, classifiers=None, beam_size=None, c_terminal_amidated=True):
    """
    Decode the points z_i = z_start + i/(steps-1) (z_end - z_start). Each row carries the decoded sequence,
    its descriptors and the latent class probabilities
    """
    if steps < 2:
        raise ConfigError("steps must be >= 2")
    z_start = np.asarray(z_start, dtype=np.float64)
    z_end = np.asarray(z_end, dtype=np.float64)
    classifiers = classifiers or {}
    rows = []
    for i in range(steps):
        t = i / (steps - 1)
        z = z_start + t * (z_end - z_start)
        seq = model.decode_beam(z, beam_size)
        row = OrderedDict([("step", i), ("t", t), ("z_distance", float(np.linalg.norm(z - z_start))), ("sequence", seq)])
        for attribute, clf in classifiers.items():
            row["prob_" + attribute] = float(clf.prob(z))
        desc = descriptors(seq, c_terminal_amidated) if seq else None
        for field in DescriptorVector._fields:
            row[field] = getattr(desc, field) if desc else np.nan
        rows.append(row)
    return pd.DataFrame(rows)
