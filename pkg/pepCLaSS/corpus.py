# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
import os
import enum
import hashlib
from collections import OrderedDict, namedtuple, Counter

# Third party imports
import numpy as np
import pandas as pd
from pyfaidx import Fasta, FastaIndexingError

# Local imports
from pepCLaSS.common import *

# ~~~~~~~~~~~~~~CONSTANTS~~~~~~~~~~~~~~#
AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"
AMINO_ACID_SET = frozenset(AMINO_ACIDS)
SPECIAL_TOKENS = ("<pad>", "<sos>", "<eos>", "<unk>")
PAD, SOS, EOS, UNK = range(4)

ATTRIBUTES = ("AMP", "Toxic", "BroadSpectrum", "Structured", "Hormone", "Antihypertensive", "Anticancer")
ATTRIBUTE_ALIASES = {
    "amp": "AMP",
    "toxic": "Toxic",
    "toxicity": "Toxic",
    "broad": "BroadSpectrum",
    "broadspectrum": "BroadSpectrum",
    "struct": "Structured",
    "structure": "Structured",
    "structured": "Structured",
    "hormone": "Hormone",
    "antihypertensive": "Antihypertensive",
    "anticancer": "Anticancer",
}
SPLITS = ("train", "heldout", "test")


class RejectionReason(enum.Enum):
    Empty = "Empty"
    LowercasePresent = "LowercasePresent"
    NonNaturalResidue = "NonNaturalResidue"
    TooLong = "TooLong"


SequenceRejection = namedtuple("SequenceRejection", ["raw", "reason"])
CorpusEntry = namedtuple("CorpusEntry", ["sequence", "seq_id", "split", "labels"])

# ~~~~~~~~~~~~~~SEQUENCES AND VOCABULARY~~~~~~~~~~~~~~#


class PeptideSequence(str):
    """Validated amino-acid string. Only build through validate_sequence"""

    @property
    def residues(self):
        return list(self)


def validate_sequence(raw, max_seq_length=25):
    """
    Check that a raw string is a valid peptide. Nothing is normalised: a lowercase or padded input is rejected.
    Returns a PeptideSequence or a SequenceRejection
    """
    if raw is None or len(raw) == 0:
        return SequenceRejection(raw, RejectionReason.Empty)
    if any(c.islower() for c in raw):
        return SequenceRejection(raw, RejectionReason.LowercasePresent)
    if not set(raw) <= AMINO_ACID_SET:
        return SequenceRejection(raw, RejectionReason.NonNaturalResidue)
    if len(raw) > max_seq_length:
        return SequenceRejection(raw, RejectionReason.TooLong)
    return PeptideSequence(raw)


def canonical_attribute(name):
    """Map a user supplied attribute name to its canonical form"""
    if name in ATTRIBUTES:
        return name
    try:
        return ATTRIBUTE_ALIASES[name.strip().lower()]
    except (KeyError, AttributeError):
        raise UnknownAttributeError("Unknown attribute name `{}`. Valid names: {}".format(name, ", ".join(ATTRIBUTES)))


class Vocabulary:
    def __init__(self, tokens=None):
        """Token table: PAD, SOS, EOS, UNK then the 20 natural amino acids"""
        self.tokens = list(tokens) if tokens else list(SPECIAL_TOKENS) + list(AMINO_ACIDS)
        self.stoi = {t: i for i, t in enumerate(self.tokens)}
        if len(self.stoi) != len(self.tokens):
            raise DataError("Duplicated tokens in vocabulary")

    def __len__(self):
        return len(self.tokens)

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def __repr__(self):
        return "Vocabulary({} tokens)".format(len(self))

    def to_list(self):
        return list(self.tokens)

    def tokenize(self, sequence, max_seq_length=25):
        """Token ids framed with SOS/EOS and right padded with PAD to max_seq_length+2"""
        if len(sequence) > max_seq_length:
            raise DataError("Sequence longer than max_seq_length ({}): {}".format(max_seq_length, sequence))
        try:
            ids = [self.stoi[c] for c in sequence]
        except KeyError as E:
            raise DataError("Token {} outside vocabulary".format(E))
        row = np.full(max_seq_length + 2, PAD, dtype=np.int64)
        row[0] = SOS
        row[1 : len(ids) + 1] = ids
        row[len(ids) + 1] = EOS
        return row

    def tokenize_batch(self, sequences, max_seq_length=25):
        if len(sequences) == 0:
            return np.zeros((0, max_seq_length + 2), dtype=np.int64)
        return np.stack([self.tokenize(s, max_seq_length) for s in sequences])

    def detokenize(self, ids):
        """Residues up to the first EOS. SOS and PAD are skipped, UNK is rendered as X"""
        s = []
        for i in ids:
            i = int(i)
            if i == EOS:
                break
            if i in (SOS, PAD):
                continue
            s.append("X" if i == UNK else self.tokens[i])
        return "".join(s)


def split_of(sequence, seed, ratios=(0.8, 0.1, 0.1)):
    """Pure function of (sequence, seed): seeded 64-bit blake2b hash mapped to [0,1) and thresholded"""
    h = hashlib.blake2b("{}:{}".format(seed, sequence).encode("utf-8"), digest_size=8).digest()
    u = int.from_bytes(h, "little") / 2 ** 64
    if u < ratios[0]:
        return "train"
    if u < ratios[0] + ratios[1]:
        return "heldout"
    return "test"


# ~~~~~~~~~~~~~~CORPUS~~~~~~~~~~~~~~#


class LabeledCorpus:
    def __init__(self, entries, vocabulary=None, max_seq_length=25, seed=0, skip_report=None):
        """
        Immutable collection of unique peptide sequences with sparse binary labels and split assignment
        """
        self.entries = tuple(entries)
        self.vocabulary = vocabulary or Vocabulary()
        self.max_seq_length = max_seq_length
        self.seed = seed
        self.skip_report = skip_report or OrderedDict([("total", len(self.entries)), ("accepted", len(self.entries)), ("rejected", OrderedDict())])
        self.index = {e.sequence: i for i, e in enumerate(self.entries)}
        if len(self.index) != len(self.entries):
            raise DataError("Duplicated sequences in corpus")

    # ~~~~~~~~~~~~~~MAGIC AND PROPERTY METHODS~~~~~~~~~~~~~~#

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        for e in self.entries:
            yield e

    def __contains__(self, sequence):
        return sequence in self.index

    def __getitem__(self, sequence):
        return self.entries[self.index[sequence]]

    def __repr__(self):
        return dict_to_str(self.summary())

    @property
    def attributes(self):
        found = set()
        for e in self.entries:
            found.update(e.labels)
        return [a for a in ATTRIBUTES if a in found]

    # ~~~~~~~~~~~~~~PUBLIC METHODS~~~~~~~~~~~~~~#

    def split(self, name):
        if not name in SPLITS:
            raise DataError("Unknown split `{}`".format(name))
        return [e for e in self.entries if e.split == name]

    def sequences(self, split=None):
        return [e.sequence for e in self.entries if split is None or e.split == split]

    def labeled(self, attribute, split=None):
        """Sequences and binary labels of the entries carrying a label for attribute"""
        attribute = canonical_attribute(attribute)
        seqs, labels = [], []
        for e in self.entries:
            if attribute in e.labels and (split is None or e.split == split):
                seqs.append(e.sequence)
                labels.append(e.labels[attribute])
        return seqs, np.array(labels, dtype=np.int64)

    def summary(self):
        d = OrderedDict()
        d["Entries"] = len(self)
        for split in SPLITS:
            d["Split {}".format(split)] = sum(1 for e in self.entries if e.split == split)
        for attribute in self.attributes:
            pos = sum(1 for e in self.entries if e.labels.get(attribute) == 1)
            neg = sum(1 for e in self.entries if e.labels.get(attribute) == 0)
            d["Attribute {}".format(attribute)] = "{} positive / {} negative".format(pos, neg)
        lengths = Counter(len(e.sequence) for e in self.entries)
        d["Length histogram"] = OrderedDict((str(k), lengths[k]) for k in sorted(lengths))
        return d

    def save(self, fn, prov=None):
        """Write the corpus as a TSV table with one column per attribute (1/0/empty)"""
        mkbasedir(fn, exist_ok=True)
        attributes = self.attributes
        rows = []
        for e in self.entries:
            row = OrderedDict([("sequence", str(e.sequence)), ("seq_id", e.seq_id), ("split", e.split)])
            for a in attributes:
                row[a] = "" if a not in e.labels else str(e.labels[a])
            rows.append(row)
        df = pd.DataFrame(rows, columns=["sequence", "seq_id", "split"] + attributes)
        with open(fn, "w") as fp:
            if prov:
                fp.write(provenance_line(prov))
            fields = ["max_seq_length={}".format(self.max_seq_length), "split_seed={}".format(self.seed)]
            fields += ["{}={}".format(k, self.skip_report.get(k, 0)) for k in ("total", "accepted", "label_conflicts")]
            fields += ["rejected:{}={}".format(reason, n) for reason, n in self.skip_report["rejected"].items()]
            fp.write("# " + " ".join(fields) + "\n")
            df.to_csv(fp, sep="\t", index=False)

    @classmethod
    def load(cls, fn, verbose=False, quiet=False):
        """Read back a corpus written by LabeledCorpus.save"""
        log = get_logger(name="pepCLaSS_Corpus", verbose=verbose, quiet=quiet)
        check_readable(fn, "Corpus file")
        max_seq_length, seed = 25, 0
        skip_report = OrderedDict([("rejected", OrderedDict())])
        with open(fn) as fp:
            for line in fp:
                if not line.startswith("#"):
                    break
                for field in line[1:].split():
                    key, _, val = field.partition("=")
                    if key == "max_seq_length":
                        max_seq_length = int(val)
                    elif key == "split_seed":
                        seed = int(val)
                    elif key in ("total", "accepted", "label_conflicts"):
                        skip_report[key] = int(val)
                    elif key.startswith("rejected:"):
                        skip_report["rejected"][key.partition(":")[2]] = int(val)
        df = pd.read_csv(fn, sep="\t", comment="#", dtype=str, keep_default_na=False)
        entries = []
        for i, line in enumerate(df.itertuples(index=False), 1):
            d = line._asdict()
            seq = validate_sequence(d.pop("sequence"), max_seq_length)
            if isinstance(seq, SequenceRejection):
                raise MalformedRowError(fn, i, "invalid sequence ({})".format(seq.reason.value))
            labels = OrderedDict((a, int(v)) for a, v in list(d.items())[2:] if v != "")
            entries.append(CorpusEntry(seq, d["seq_id"], d["split"], labels))
        log.debug("Loaded {} corpus entries from {}".format(len(entries), fn))
        if "total" in skip_report:
            skip_report = OrderedDict((k, skip_report.get(k, 0)) for k in ("total", "accepted", "rejected", "label_conflicts"))
        else:
            skip_report = None
        return cls(entries, max_seq_length=max_seq_length, seed=seed, skip_report=skip_report)


# ~~~~~~~~~~~~~~LOADING~~~~~~~~~~~~~~#


def read_sequence_file(fn):
    """
    Yield (id, raw sequence) from a FASTA file (header ignored beyond the id) or a CSV/TSV file with a
    `sequence` column and an optional `id` column
    """
    check_readable(fn, "Sequence file")
    low = fn.lower()
    if low.endswith((".csv", ".tsv", ".csv.gz", ".tsv.gz")):
        sep = "\t" if ".tsv" in low else ","
        df = pd.read_csv(fn, sep=sep, dtype=str, keep_default_na=False, comment="#")
        if not "sequence" in df.columns:
            raise MalformedRowError(fn, 0, "missing `sequence` column")
        ids = df["id"] if "id" in df.columns else ["{}:{}".format(os.path.basename(fn), i) for i in range(1, len(df) + 1)]
        for seq_id, raw in zip(ids, df["sequence"]):
            yield seq_id, raw
    else:
        try:
            with Fasta(fn, as_raw=True, sequence_always_upper=False, duplicate_action="first") as fasta_fp:
                for record in fasta_fp:
                    yield record.name, str(record[:]) if len(record) else ""
        except (FastaIndexingError, ValueError) as E:
            raise DataError("Cannot parse FASTA file `{}`: {}".format(fn, E))


def read_label_file(fn):
    """Yield (row index, sequence, attribute, value) from a label CSV with header `sequence,attribute,value`"""
    check_readable(fn, "Label file")
    try:
        df = pd.read_csv(fn, dtype=str, keep_default_na=False)
    except pd.errors.ParserError as E:
        raise MalformedRowError(fn, 0, str(E))
    missing = [c for c in ("sequence", "attribute", "value") if c not in df.columns]
    if missing:
        raise MalformedRowError(fn, 0, "missing column(s) {}".format(", ".join(missing)))
    for i, (seq, attribute, value) in enumerate(zip(df["sequence"], df["attribute"], df["value"]), 1):
        value = value.strip()
        if value not in ("0", "1"):
            raise MalformedRowError(fn, i, "label value `{}` is not binary".format(value))
        if not seq:
            raise MalformedRowError(fn, i, "empty sequence field")
        yield i, seq, canonical_attribute(attribute), int(value)


def load_corpus(seq_file, label_files=[], seed=0, max_seq_length=25, ratios=(0.8, 0.1, 0.1), verbose=False, quiet=False):
    """
    Build a LabeledCorpus. Invalid sequences are counted and skipped, duplicates keep their first occurrence,
    labels are joined by exact sequence match and splits come from a seeded hash of the sequence
    * seq_file
        FASTA or CSV file, or list of files
    * label_files
        CSV files with columns sequence, attribute, value
    """
    log = get_logger(name="pepCLaSS_Corpus", verbose=verbose, quiet=quiet)
    if abs(sum(ratios) - 1) > 1e-9:
        raise ConfigError("Split ratios must sum to 1: {}".format(ratios))

    seq_files = [seq_file] if isinstance(seq_file, str) else list(seq_file or [])
    counter = Counter()
    rejected = Counter()
    seqs = OrderedDict()

    def add(seq_id, raw):
        counter["total"] += 1
        seq = validate_sequence(raw, max_seq_length)
        if isinstance(seq, SequenceRejection):
            rejected[seq.reason.value] += 1
            return None
        if seq in seqs:
            rejected["Duplicate"] += 1
            return seq
        seqs[seq] = (seq_id, OrderedDict())
        return seq

    for fn in seq_files:
        log.debug("Reading sequences from {}".format(fn))
        for seq_id, raw in read_sequence_file(fn):
            add(seq_id, raw)

    # Labeled sequences missing from the sequence files are added once, keeping their labels
    for fn in label_files or []:
        log.debug("Reading labels from {}".format(fn))
        for i, raw, attribute, value in read_label_file(fn):
            if raw in seqs:
                seq = raw
            else:
                seq = add(raw, raw)
                if seq is None:
                    continue
            labels = seqs[seq][1]
            if attribute in labels:
                if labels[attribute] != value:
                    counter["label_conflicts"] += 1
                continue
            labels[attribute] = value
            counter["labels"] += 1

    entries = [
        CorpusEntry(seq, seq_id, split_of(seq, seed, ratios), labels) for seq, (seq_id, labels) in seqs.items()
    ]
    skip_report = OrderedDict()
    skip_report["total"] = counter["total"]
    skip_report["accepted"] = len(entries)
    skip_report["rejected"] = OrderedDict(sorted(rejected.items()))
    skip_report["label_conflicts"] = counter["label_conflicts"]
    log.info("Loaded {:,} sequences ({:,} rejected)".format(len(entries), sum(rejected.values())))
    return LabeledCorpus(entries, max_seq_length=max_seq_length, seed=seed, skip_report=skip_report)


# ~~~~~~~~~~~~~~BATCHES~~~~~~~~~~~~~~#


def training_batches(corpus, batch_size=32, upsample_ratio=20, seed=0, split="train", attributes=None):
    """
    Infinite seed-deterministic stream of token batches of shape (batch_size, max_seq_length+2).
    With upsample_ratio r, rows are drawn from labeled entries with probability 1/(1+r) and from unlabeled
    entries otherwise. A falsy ratio draws uniformly over the split
    """
    entries = corpus.split(split)
    if not entries:
        raise DataError("Empty {} split".format(split))
    rng = np.random.default_rng(seed)
    vocab = corpus.vocabulary
    tokens = vocab.tokenize_batch([e.sequence for e in entries], corpus.max_seq_length)

    if upsample_ratio:
        if attributes:
            attributes = [canonical_attribute(a) for a in attributes]
            is_labeled = np.array([any(a in e.labels for a in attributes) for e in entries])
        else:
            is_labeled = np.array([bool(e.labels) for e in entries])
        labeled_idx = np.flatnonzero(is_labeled)
        unlabeled_idx = np.flatnonzero(~is_labeled)
        if len(labeled_idx) == 0 or len(unlabeled_idx) == 0:
            raise DataError("Upsampling needs at least one labeled and one unlabeled {} entry".format(split))
        p_labeled = 1.0 / (1.0 + upsample_ratio)
        while True:
            from_labeled = rng.random(batch_size) < p_labeled
            idx = np.where(
                from_labeled,
                labeled_idx[rng.integers(0, len(labeled_idx), batch_size)],
                unlabeled_idx[rng.integers(0, len(unlabeled_idx), batch_size)],
            )
            yield tokens[idx]
    else:
        while True:
            yield tokens[rng.integers(0, len(entries), batch_size)]


def amino_acid_composition(sequences):
    """Relative frequency of each of the 20 residues (alphabetical order) over a set of sequences"""
    counts = Counter()
    for s in sequences:
        counts.update(s)
    total = sum(counts[a] for a in AMINO_ACIDS)
    if total == 0:
        return np.zeros(len(AMINO_ACIDS))
    return np.array([counts[a] / total for a in AMINO_ACIDS])
