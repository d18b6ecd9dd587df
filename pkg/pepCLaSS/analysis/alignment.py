# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
import os
from functools import lru_cache
from collections import namedtuple, OrderedDict
from multiprocessing import Pool

# Third party imports
import numpy as np
import pandas as pd
from tqdm import tqdm

# Local imports
from pepCLaSS.common import *

# ~~~~~~~~~~~~~~CONSTANTS~~~~~~~~~~~~~~#
PAM30_FN = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data", "PAM30.txt")
PAM30_SHA256 = "7034941bdff749db8f686dc576a35e1233cac2e14fc1e53874c8f7d5399c63e9"
GAP_OPEN = -9
GAP_EXTEND = -1
NEG_INF = -1e18

# Traceback states, in tie-breaking priority order
MATCH, DELETE, INSERT = 0, 1, 2

AlignmentResult = namedtuple(
    "AlignmentResult", ["score", "aligned_a", "aligned_b", "identity_pct", "positive_pct", "gap_pct", "coverage_pct"]
)

# ~~~~~~~~~~~~~~SUBSTITUTION MATRIX~~~~~~~~~~~~~~#


class SubstitutionMatrix:
    def __init__(self, alphabet, scores, name=""):
        self.alphabet = alphabet
        self.scores = np.asarray(scores, dtype=np.int64)
        self.index = {aa: i for i, aa in enumerate(alphabet)}
        self.name = name

    def __repr__(self):
        return "SubstitutionMatrix({}, {} letters)".format(self.name, len(self.alphabet))

    def __call__(self, a, b):
        return int(self.scores[self.index[a], self.index[b]])

    def encode(self, sequence):
        try:
            return np.array([self.index[aa] for aa in sequence], dtype=np.int64)
        except KeyError as E:
            raise DataError("Residue {} not in the {} alphabet".format(E, self.name))


@lru_cache(maxsize=4)
def load_matrix(fn=PAM30_FN, sha256=PAM30_SHA256):
    """Read an NCBI formatted substitution matrix, checking its checksum when one is given"""
    check_readable(fn, "Substitution matrix")
    if sha256 and sha256_file(fn) != sha256:
        raise DataError("Checksum mismatch for substitution matrix `{}`".format(fn))
    rows = []
    alphabet = None
    with open(fn) as fp:
        for line in fp:
            if line.startswith("#") or not line.strip():
                continue
            fields = line.split()
            if alphabet is None:
                alphabet = "".join(fields)
            else:
                rows.append([int(v) for v in fields[1:]])
    scores = np.array(rows)
    if scores.shape != (len(alphabet), len(alphabet)):
        raise DataError("Malformed substitution matrix `{}`".format(fn))
    return SubstitutionMatrix(alphabet, scores, name=os.path.basename(fn).split(".")[0])


# ~~~~~~~~~~~~~~GLOBAL ALIGNMENT~~~~~~~~~~~~~~#


def _fill(a, b, S, gap_open, gap_extend):
    """Gotoh score matrices. M ends on a residue pair, X on a gap in b, Y on a gap in a"""
    n, m = len(a), len(b)
    M = np.full((n + 1, m + 1), NEG_INF)
    X = np.full((n + 1, m + 1), NEG_INF)
    Y = np.full((n + 1, m + 1), NEG_INF)
    M[0, 0] = 0
    for i in range(1, n + 1):
        X[i, 0] = gap_open + (i - 1) * gap_extend
    for j in range(1, m + 1):
        Y[0, j] = gap_open + (j - 1) * gap_extend
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            M[i, j] = S[a[i - 1], b[j - 1]] + max(M[i - 1, j - 1], X[i - 1, j - 1], Y[i - 1, j - 1])
            X[i, j] = max(M[i - 1, j] + gap_open, X[i - 1, j] + gap_extend, Y[i - 1, j] + gap_open)
            Y[i, j] = max(M[i, j - 1] + gap_open, Y[i, j - 1] + gap_extend, X[i, j - 1] + gap_open)
    return M, X, Y


def _argmax_state(values):
    """First state reaching the max: match > delete > insert"""
    best = max(values)
    return values.index(best)


def global_align(a, b, matrix=None, gap_open=GAP_OPEN, gap_extend=GAP_EXTEND):
    """
    Affine gap Needleman-Wunsch (Gotoh). A gap of length L costs gap_open + (L - 1) * gap_extend.
    Traceback ties prefer a residue pair, then a gap in b, then a gap in a.
    Percentages are over the alignment length, except coverage: residues of a aligned to a residue of b
    over len(a)
    """
    matrix = matrix or load_matrix()
    ea, eb = matrix.encode(a), matrix.encode(b)
    S = matrix.scores
    M, X, Y = _fill(ea, eb, S, gap_open, gap_extend)
    n, m = len(a), len(b)
    mats = (M, X, Y)
    state = _argmax_state([M[n, m], X[n, m], Y[n, m]])
    score = mats[state][n, m]

    out_a, out_b = [], []
    i, j = n, m
    while i > 0 or j > 0:
        if state == MATCH:
            out_a.append(a[i - 1])
            out_b.append(b[j - 1])
            state = _argmax_state([M[i - 1, j - 1], X[i - 1, j - 1], Y[i - 1, j - 1]])
            i, j = i - 1, j - 1
        elif state == DELETE:
            out_a.append(a[i - 1])
            out_b.append("-")
            if i == 1 and j == 0:
                i -= 1
                continue
            state = _argmax_state([M[i - 1, j] + gap_open, X[i - 1, j] + gap_extend, Y[i - 1, j] + gap_open])
            i -= 1
        else:
            out_a.append("-")
            out_b.append(b[j - 1])
            if j == 1 and i == 0:
                j -= 1
                continue
            state = _argmax_state([M[i, j - 1] + gap_open, X[i, j - 1] + gap_open, Y[i, j - 1] + gap_extend])
            j -= 1

    aligned_a = "".join(reversed(out_a))
    aligned_b = "".join(reversed(out_b))
    return _alignment_stats(int(round(score)), aligned_a, aligned_b, len(a), matrix)


def _alignment_stats(score, aligned_a, aligned_b, len_a, matrix):
    L = len(aligned_a)
    identical = positive = gaps = covered = 0
    for x, y in zip(aligned_a, aligned_b):
        if x == "-" or y == "-":
            gaps += 1
            continue
        covered += 1
        identical += x == y
        positive += matrix(x, y) > 0
    pct = lambda v, total: 100.0 * v / total if total else 0.0
    return AlignmentResult(
        score=score,
        aligned_a=aligned_a,
        aligned_b=aligned_b,
        identity_pct=pct(identical, L),
        positive_pct=pct(positive, L),
        gap_pct=pct(gaps, L),
        coverage_pct=pct(covered, len_a),
    )


def global_align_scores(query, subjects, matrix=None, gap_open=GAP_OPEN, gap_extend=GAP_EXTEND):
    """Optimal global alignment scores of one query against many subjects, vectorized over the subjects"""
    matrix = matrix or load_matrix()
    subjects = list(subjects)
    if not subjects:
        return np.zeros(0)
    q = matrix.encode(query)
    lengths = np.array([len(s) for s in subjects])
    m = lengths.max()
    B = np.zeros((len(subjects), m), dtype=np.int64)
    for k, s in enumerate(subjects):
        B[k, : len(s)] = matrix.encode(s)
    N, n = len(subjects), len(q)
    S = matrix.scores

    cols = np.arange(m + 1)
    M_prev = np.full((N, m + 1), NEG_INF)
    X_prev = np.full((N, m + 1), NEG_INF)
    Y_prev = np.full((N, m + 1), NEG_INF)
    M_prev[:, 0] = 0
    Y_prev[:, 1:] = gap_open + (cols[1:] - 1) * gap_extend
    for i in range(1, n + 1):
        M = np.full((N, m + 1), NEG_INF)
        X = np.full((N, m + 1), NEG_INF)
        Y = np.full((N, m + 1), NEG_INF)
        X[:, 0] = gap_open + (i - 1) * gap_extend
        sub = S[q[i - 1]][B]
        best_diag = np.maximum(np.maximum(M_prev[:, :-1], X_prev[:, :-1]), Y_prev[:, :-1])
        M[:, 1:] = sub + best_diag
        X[:, 1:] = np.maximum(np.maximum(M_prev[:, 1:] + gap_open, X_prev[:, 1:] + gap_extend), Y_prev[:, 1:] + gap_open)
        for j in range(1, m + 1):
            Y[:, j] = np.maximum(np.maximum(M[:, j - 1] + gap_open, Y[:, j - 1] + gap_extend), X[:, j - 1] + gap_open)
        M_prev, X_prev, Y_prev = M, X, Y
    rows = np.arange(N)
    final = np.maximum(np.maximum(M_prev[rows, lengths], X_prev[rows, lengths]), Y_prev[rows, lengths])
    return np.rint(final).astype(np.int64)


def self_score(sequence, matrix=None):
    matrix = matrix or load_matrix()
    return int(sum(matrix(aa, aa) for aa in sequence))


def normalized_similarity(a, b, matrix=None):
    """Alignment score over sqrt(self score a x self score b)"""
    matrix = matrix or load_matrix()
    denom = np.sqrt(self_score(a, matrix) * self_score(b, matrix))
    return global_align(a, b, matrix).score / denom if denom > 0 else 0.0


# ~~~~~~~~~~~~~~NOVELTY~~~~~~~~~~~~~~#


class NoveltyWorker:
    def __init__(self, reference, gap_open=GAP_OPEN, gap_extend=GAP_EXTEND):
        """Best global alignment of candidates against a read-only reference set"""
        # Sorted so that the best hit does not depend on the reference order
        self.reference = sorted(set(reference))
        self.gap_open = gap_open
        self.gap_extend = gap_extend
        self.matrix = load_matrix()

    def __call__(self, index, candidate):
        scores = global_align_scores(candidate, self.reference, self.matrix, self.gap_open, self.gap_extend)
        best = int(np.argmax(scores))
        hit = self.reference[best]
        res = global_align(candidate, hit, self.matrix, self.gap_open, self.gap_extend)
        row = OrderedDict()
        row["sequence"] = candidate
        row["best_match"] = hit
        row["score"] = res.score
        row["coverage_pct"] = res.coverage_pct
        row["identity_pct"] = res.identity_pct
        row["positive_pct"] = res.positive_pct
        row["gap_pct"] = res.gap_pct
        row["aligned_query"] = res.aligned_a
        row["aligned_match"] = res.aligned_b
        return index, row


def initializer(args):
    """Initializes a worker object in the global namespace of each pool process"""
    global worker
    worker = NoveltyWorker(**args)


def worker_function(args):
    """Calls the work function of the worker object in the global namespace"""
    return worker(*args)


def novelty_report(candidates, reference, ids=None, threads=1, progress=False, gap_open=GAP_OPEN, gap_extend=GAP_EXTEND):
    """
    For each candidate, the best scoring global alignment over the reference sequences.
    Returns a DataFrame in candidate order
    """
    candidates = list(candidates)
    reference = list(reference)
    if not reference:
        raise DataError("Empty reference set for the novelty report")
    init_args = dict(reference=reference, gap_open=gap_open, gap_extend=gap_extend)
    tasks = list(enumerate(candidates))
    rows = [None] * len(candidates)

    with tqdm(total=len(tasks), unit=" candidates", desc="\tProgress", disable=not progress) as pbar:
        if threads <= 1:
            initializer(init_args)
            results = map(worker_function, tasks)
            for index, row in results:
                rows[index] = row
                pbar.update(1)
        else:
            with Pool(threads, initializer=initializer, initargs=[init_args]) as pool:
                for index, row in pool.imap(worker_function, tasks, chunksize=8):
                    rows[index] = row
                    pbar.update(1)

    df = pd.DataFrame(rows, columns=["sequence", "best_match", "score", "coverage_pct", "identity_pct", "positive_pct", "gap_pct", "aligned_query", "aligned_match"])
    df.insert(0, "id", ids if ids is not None else ["seq_{}".format(i) for i in range(len(candidates))])
    return df
