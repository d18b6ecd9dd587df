# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
from collections import Counter, OrderedDict

# Local imports
from pepCLaSS.common import *

# ~~~~~~~~~~~~~~FUNCTIONS~~~~~~~~~~~~~~#


def kmer_counts(sequences, k):
    """Multiset of all the k-length windows of a set of sequences"""
    if k < 1:
        raise ConfigError("k must be >= 1")
    counts = Counter()
    for s in sequences:
        counts.update(s[i : i + k] for i in range(len(s) - k + 1))
    return counts


def kmer_uniqueness(sequences, k):
    """Fraction of the distinct k-mers that occur exactly once"""
    counts = kmer_counts(sequences, k)
    if not counts:
        raise DataError("All sequences are shorter than k={}".format(k))
    return sum(1 for c in counts.values() if c == 1) / len(counts)


def top_kmers(sequences, k, n=10):
    """Most frequent k-mers, ties in alphabetical order"""
    counts = kmer_counts(sequences, k)
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:n]


def kmer_panel(sequences, k_values=(3, 4, 5, 6), n=10):
    """Uniqueness and top k-mers for several window sizes. Sizes longer than every sequence are skipped"""
    d = OrderedDict()
    for k in k_values:
        try:
            d[k] = OrderedDict([("uniqueness", kmer_uniqueness(sequences, k)), ("top", top_kmers(sequences, k, n))])
        except DataError:
            continue
    return d
