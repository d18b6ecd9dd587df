# -*- coding: utf-8 -*-

"""
Attribute conditioned generation by rejection sampling in the latent space: points are proposed by the
latent mixture density and accepted with probability equal to the product of the latent classifier scores
for the target attribute values. Accepted points are decoded by beam search.
"""

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
from collections import OrderedDict, namedtuple, Counter
from multiprocessing import Pool

# Third party imports
import numpy as np
import pandas as pd
from tqdm import tqdm
from pyfaidx import Fasta, FastaIndexingError

# Local imports
from pepCLaSS.common import *
from pepCLaSS.corpus import canonical_attribute, validate_sequence, read_sequence_file, SequenceRejection

# ~~~~~~~~~~~~~~TYPES~~~~~~~~~~~~~~#

SampleResult = namedtuple("SampleResult", ["Z", "accept_probs", "draw_index", "stream_id", "attempts", "acceptance_rate"])


class AttributeTarget:
    def __init__(self, items):
        """
        Desired attribute values
        * items
            Iterable of (attribute, value) pairs with value 0 or 1
        """
        self.items = OrderedDict()
        for attribute, value in items:
            attribute = canonical_attribute(attribute)
            if attribute in self.items:
                raise ConfigError("Attribute {} given twice in the target".format(attribute))
            if value not in (0, 1):
                raise ConfigError("Target value for {} must be 0 or 1".format(attribute))
            self.items[attribute] = int(value)
        if not self.items:
            raise ConfigError("Empty attribute target")

    def __repr__(self):
        return ",".join("{}={}".format(k, v) for k, v in self.items.items())

    def __iter__(self):
        return iter(self.items.items())

    @classmethod
    def parse(cls, target):
        """Build from `amp=1,toxic=0` style strings or lists of such tokens"""
        if isinstance(target, str):
            target = target.split(",")
        items = []
        for token in target:
            key, sep, value = token.strip().partition("=")
            if not sep:
                raise ConfigError("Invalid target `{}`: expected attribute=value".format(token))
            try:
                items.append((key.strip(), int(value)))
            except ValueError:
                raise ConfigError("Invalid target value in `{}`".format(token))
        return cls(items)

    def check(self, classifiers):
        for attribute in self.items:
            if attribute not in classifiers:
                raise ModelError("No latent classifier for attribute {}".format(attribute))


class Candidate:
    def __init__(self, cand_id, sequence, origin_z, accept_prob, novel=True, class_probs=None):
        """Generated sequence with its latent origin and the verdicts of the screening stages"""
        if not 0 < accept_prob <= 1:
            raise ModelError("accept_prob must be in (0, 1], got {}".format(accept_prob))
        self.id = cand_id
        self.sequence = sequence
        self.origin_z = np.asarray(origin_z, dtype=np.float64)
        self.accept_prob = float(accept_prob)
        self.novel = novel
        self.class_probs = class_probs or OrderedDict()
        self.verdicts = OrderedDict()

    def __repr__(self):
        return "Candidate({}, {}, accept_prob={:.4f})".format(self.id, self.sequence, self.accept_prob)

    @property
    def z_norm(self):
        return float(np.linalg.norm(self.origin_z))

    @property
    def passed(self):
        return all(passed for _, passed in self.verdicts.values())

    def add_verdict(self, stage, score, passed):
        if stage in self.verdicts:
            raise ModelError("Stage {} already recorded for {}".format(stage, self.id))
        self.verdicts[stage] = (score, bool(passed))


# ~~~~~~~~~~~~~~REJECTION SAMPLING~~~~~~~~~~~~~~#


def acceptance_prob(Z, classifiers, target):
    """Product over the target attributes of q(a_i = target_i | z)"""
    p = np.ones(len(Z))
    for attribute, value in target:
        p *= classifiers[attribute].prob(Z, value)
    return p


def class_sample(gmm, classifiers, target, n_accepted, max_attempts, rng, chunk_size=4096, raise_on_empty=True):
    """
    Draw z from the mixture, u from U(0, 1), accept when u < acceptance_prob(z), until n_accepted points are
    accepted or max_attempts draws were made. Draws are made in chunks, attempts are counted up to the last
    acceptance needed. The empirical acceptance rate estimates q(target).
    Raises UnrealizableAttributeCombination when nothing was accepted
    """
    target.check(classifiers)
    if n_accepted < 1 or max_attempts < 1:
        raise ConfigError("n_accepted and max_attempts must be positive")
    Zs, probs, index = [], [], []
    attempts = accepted = 0
    while accepted < n_accepted and attempts < max_attempts:
        m = min(chunk_size, max_attempts - attempts)
        Z, _ = gmm.sample(m, rng)
        u = rng.random(m)
        p = acceptance_prob(Z, classifiers, target)
        hits = np.flatnonzero(u < p)[: n_accepted - accepted]
        if accepted + len(hits) >= n_accepted:
            used = int(hits[-1]) + 1
        else:
            used = m
        Zs.append(Z[hits])
        probs.append(p[hits])
        index.append(attempts + hits)
        attempts += used
        accepted += len(hits)

    if accepted == 0 and raise_on_empty:
        raise UnrealizableAttributeCombination(
            "No latent point accepted for target {} after {:,} attempts".format(target, attempts)
        )
    D = gmm.dim
    return SampleResult(
        Z=np.concatenate(Zs) if Zs else np.zeros((0, D)),
        accept_probs=np.concatenate(probs) if probs else np.zeros(0),
        draw_index=np.concatenate(index).astype(np.int64) if index else np.zeros(0, dtype=np.int64),
        stream_id=np.zeros(accepted, dtype=np.int64),
        attempts=attempts,
        acceptance_rate=accepted / attempts if attempts else 0.0,
    )


class SamplerWorker:
    def __init__(self, gmm, classifiers, target, chunk_size=4096):
        self.gmm = gmm
        self.classifiers = classifiers
        self.target = target
        self.chunk_size = chunk_size

    def __call__(self, stream_id, seed_seq, n_accepted, max_attempts):
        rng = np.random.default_rng(seed_seq)
        res = class_sample(self.gmm, self.classifiers, self.target, n_accepted, max_attempts, rng, self.chunk_size, raise_on_empty=False)
        return stream_id, res


def initializer(args):
    """Initializes a worker object in the global namespace of each pool process"""
    global worker
    worker = args.pop("worker_class")(**args)


def worker_function(args):
    """Calls the work function of the worker object in the global namespace"""
    return worker(*args)


def _split(total, parts):
    return [total // parts + (1 if i < total % parts else 0) for i in range(parts)]


def parallel_class_sample(gmm, classifiers, target, n_accepted, max_attempts, seed=0, streams=8, threads=1, chunk_size=4096):
    """
    Rejection sampling over a fixed number of independent RNG streams spawned from the seed. Quotas of
    accepted points and attempts are split evenly across streams. The merged result is ordered by
    (stream id, draw index) and does not depend on the number of worker processes
    """
    target.check(classifiers)
    streams = max(1, min(streams, n_accepted))
    seeds = np.random.SeedSequence(seed).spawn(streams)
    tasks = [(i, seeds[i], n, a) for i, (n, a) in enumerate(zip(_split(n_accepted, streams), _split(max_attempts, streams)))]
    init_args = dict(worker_class=SamplerWorker, gmm=gmm, classifiers=classifiers, target=target, chunk_size=chunk_size)

    if threads <= 1:
        initializer(dict(init_args))
        results = [worker_function(t) for t in tasks]
    else:
        with Pool(min(threads, streams), initializer=initializer, initargs=[dict(init_args)]) as pool:
            results = pool.map(worker_function, tasks)

    results = sorted(results, key=lambda r: r[0])
    attempts = sum(r.attempts for _, r in results)
    accepted = sum(len(r.Z) for _, r in results)
    if accepted == 0:
        raise UnrealizableAttributeCombination(
            "No latent point accepted for target {} after {:,} attempts".format(target, attempts)
        )
    return SampleResult(
        Z=np.concatenate([r.Z for _, r in results]),
        accept_probs=np.concatenate([r.accept_probs for _, r in results]),
        draw_index=np.concatenate([r.draw_index for _, r in results]),
        stream_id=np.concatenate([np.full(len(r.Z), sid, dtype=np.int64) for sid, r in results]),
        attempts=attempts,
        acceptance_rate=accepted / attempts,
    )


# ~~~~~~~~~~~~~~DECODING~~~~~~~~~~~~~~#


class DecodeWorker:
    def __init__(self, model, beam_size=None):
        self.model = model
        self.beam_size = beam_size

    def __call__(self, index, z):
        return index, self.model.decode_beam(z, self.beam_size)


def decode_latents(model, Z, beam_size=None, threads=1, progress=False):
    """Beam decode a batch of latent points, in order"""
    tasks = list(enumerate(np.asarray(Z)))
    out = [None] * len(tasks)
    init_args = dict(worker_class=DecodeWorker, model=model, beam_size=beam_size)
    with tqdm(total=len(tasks), unit=" sequences", desc="\tDecoding", disable=not progress) as pbar:
        if threads <= 1:
            initializer(dict(init_args))
            for t in tasks:
                i, s = worker_function(t)
                out[i] = s
                pbar.update(1)
        else:
            with Pool(threads, initializer=initializer, initargs=[dict(init_args)]) as pool:
                for i, s in pool.imap(worker_function, tasks, chunksize=16):
                    out[i] = s
                    pbar.update(1)
    return out


def _merge_decodes(sequences, Z, accept_probs, training, max_seq_length, classifiers, id_prefix, counter):
    """Drop invalid decodes and merge exact duplicates, keeping the highest acceptance probability"""
    best = OrderedDict()
    for seq, z, p in zip(sequences, Z, accept_probs):
        if isinstance(validate_sequence(seq, max_seq_length), SequenceRejection):
            counter["Invalid decodes"] += 1
            continue
        if seq in best:
            counter["Duplicate decodes"] += 1
            if p > best[seq][1]:
                best[seq] = (z, p)
        else:
            best[seq] = (z, p)

    candidates = []
    for i, (seq, (z, p)) in enumerate(best.items()):
        probs = OrderedDict((a, float(clf.prob(z))) for a, clf in (classifiers or {}).items())
        novel = seq not in training
        if not novel:
            counter["Not novel"] += 1
        candidates.append(Candidate("{}_{:06d}".format(id_prefix, i), seq, z, p, novel=novel, class_probs=probs))
    counter["Unique candidates"] = len(candidates)
    return candidates


def generate_candidates(
    model, gmm, classifiers, target, count, seed=0, max_attempts=None, training=(), beam_size=None, streams=8, threads=1, progress=False
):
    """
    CLaSS generation: accept `count` latent points for the target, decode them by beam search, merge
    duplicates and flag exact matches to training sequences as not novel.
    Returns the candidates and a Counter of run statistics
    """
    max_attempts = max_attempts or 1000 * count
    res = parallel_class_sample(gmm, classifiers, target, count, max_attempts, seed=seed, streams=streams, threads=threads)
    counter = Counter()
    counter["Accepted latent points"] = len(res.Z)
    counter["Attempts"] = res.attempts
    sequences = decode_latents(model, res.Z, beam_size, threads, progress)
    candidates = _merge_decodes(sequences, res.Z, res.accept_probs, set(training), model.config.max_seq_length, classifiers, "class", counter)
    stats = OrderedDict(counter)
    stats["Acceptance rate"] = res.acceptance_rate
    return candidates, stats


def unconditioned_candidates(model, gmm, count, seed=0, training=(), beam_size=None, classifiers=None, threads=1, progress=False):
    """Decodes of plain mixture samples, the baseline of the controllability checks"""
    rng = np.random.default_rng(seed)
    Z, _ = gmm.sample(count, rng)
    counter = Counter()
    counter["Latent samples"] = count
    sequences = decode_latents(model, Z, beam_size, threads, progress)
    candidates = _merge_decodes(sequences, Z, np.ones(count), set(training), model.config.max_seq_length, classifiers, "gmm", counter)
    return candidates, OrderedDict(counter)


# ~~~~~~~~~~~~~~WRITER~~~~~~~~~~~~~~#


class Candidate_Writer:
    """Write candidates to a FASTA file (with a JSON provenance sidecar) and a companion CSV"""

    def __init__(self, fasta_fn=None, csv_fn=None, attributes=(), prov=None, verbose=False):
        self.log = get_logger(name="pepCLaSS_Candidate_Writer", verbose=verbose)
        self.fasta_fn = fasta_fn
        self.csv_fn = csv_fn
        self.attributes = list(attributes)
        self.prov = prov
        self.n = 0
        self.stats = OrderedDict()
        self.fasta_fp = self._init_fasta() if fasta_fn else None
        self.csv_fp = self._init_csv() if csv_fn else None

    # ~~~~~~~~~~~~~~PUBLIC METHODS~~~~~~~~~~~~~~#
    def write(self, cand):
        if self.fasta_fp:
            self.fasta_fp.write(">{}|{:.6g}|{}\n{}\n".format(cand.id, cand.accept_prob, "novel" if cand.novel else "not_novel", cand.sequence))
        if self.csv_fp:
            fields = [cand.id, cand.sequence, "{:.6g}".format(cand.accept_prob), int(cand.novel), "{:.6f}".format(cand.z_norm)]
            fields += ["{:.6f}".format(cand.class_probs.get(a, float("nan"))) for a in self.attributes]
            self.csv_fp.write(str_join(fields, sep=",", line_end="\n"))
        self.n += 1

    def abort(self):
        """Close and delete partial outputs"""
        self.__exit__(None, None, None)
        for fn in (self.fasta_fn, self.csv_fn, (self.fasta_fn or "") + ".json", (self.fasta_fn or "") + ".fai"):
            if fn and os.path.isfile(fn):
                os.remove(fn)

    def __enter__(self):
        self.log.debug("Opening Writer")
        return self

    def __exit__(self, exception_type, exception_val, trace):
        self.log.debug("Closing Writer")
        for fp in (self.fasta_fp, self.csv_fp):
            try:
                fp.close()
            except:
                pass
        if exception_type is None and self.fasta_fn and self.prov is not None:
            write_json(self.fasta_fn + ".json", OrderedDict([("sequences", self.n)] + list(self.stats.items())), prov=self.prov)

    # ~~~~~~~~~~~~~~PRIVATE METHODS~~~~~~~~~~~~~~#
    def _init_fasta(self):
        mkbasedir(self.fasta_fn, exist_ok=True)
        # Index of a previous run would be stale
        if os.path.isfile(self.fasta_fn + ".fai"):
            os.remove(self.fasta_fn + ".fai")
        return open(self.fasta_fn, "w")

    def _init_csv(self):
        mkbasedir(self.csv_fn, exist_ok=True)
        fp = open(self.csv_fn, "w")
        if self.prov:
            fp.write(provenance_line(self.prov))
        fp.write(str_join(["id", "sequence", "accept_prob", "novel", "z_norm"] + ["prob_" + a for a in self.attributes], sep=",", line_end="\n"))
        return fp


def _parse_header(header):
    """`id|accept_prob|novel_flag` headers written by Candidate_Writer, or any other header (id = first word)"""
    words = header.split()
    name = words[0] if words else ""
    fields = name.split("|")
    if len(fields) == 3 and fields[2] in ("novel", "not_novel"):
        try:
            return fields[0], float(fields[1]), fields[2] == "novel"
        except ValueError:
            pass
    return name, 1.0, True


def read_candidates(fn):
    """Read candidates from a FASTA file written by Candidate_Writer, or any FASTA/CSV sequence file"""
    check_readable(fn, "Candidates file")
    candidates = []
    low = fn.lower()
    if low.endswith((".fa", ".fasta", ".fa.gz", ".fasta.gz")):
        try:
            with Fasta(fn, as_raw=True, read_long_names=True, sequence_always_upper=False) as fasta_fp:
                for record in fasta_fp:
                    cand_id, accept, novel = _parse_header(record.long_name)
                    seq = str(record[:]) if len(record) else ""
                    candidates.append(Candidate(cand_id, seq, np.zeros(0), accept, novel=novel))
        except (FastaIndexingError, ValueError) as E:
            raise DataError("Cannot parse FASTA file `{}`: {}".format(fn, E))
        return candidates
    if low.endswith((".csv", ".csv.gz")):
        df = pd.read_csv(fn, dtype={"id": str, "sequence": str}, keep_default_na=False, comment="#")
        if "accept_prob" in df.columns:
            novel = df["novel"].astype(int).astype(bool) if "novel" in df.columns else [True] * len(df)
            for cand_id, seq, p, nov in zip(df["id"], df["sequence"], df["accept_prob"], novel):
                candidates.append(Candidate(cand_id, seq, np.zeros(0), float(p), novel=bool(nov)))
            return candidates
    for seq_id, seq in read_sequence_file(fn):
        candidates.append(Candidate(seq_id, seq, np.zeros(0), 1.0))
    return candidates


def read_sequences(fn):
    """(id, sequence) pairs of a candidates file, ids stripped of the sampler header fields"""
    return [(c.id, c.sequence) for c in read_candidates(fn)]
