# -*- coding: utf-8 -*-

"""
Post-generation filters. Sequence classifier logits and language model perplexity are applied as a
sequence of threshold stages. Contact time series from membrane simulations are reduced to binding time,
mean and variance of contacts and checked against the contact rule.
"""

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
import os
import operator
from collections import OrderedDict, namedtuple, Counter

# Third party imports
import numpy as np
import pandas as pd
from tqdm import tqdm

# Local imports
from pepCLaSS.common import *

# ~~~~~~~~~~~~~~CONSTANTS~~~~~~~~~~~~~~#
STAGES = ("amp", "toxic", "broad", "struct", "ppl")
STAGE_ATTRIBUTES = OrderedDict([("amp", "AMP"), ("toxic", "Toxic"), ("broad", "BroadSpectrum"), ("struct", "Structured")])
DEFAULT_DIRECTIONS = "amp>=,toxic<,broad>=,struct>=,ppl<="
COMPARATORS = OrderedDict([(">=", operator.ge), ("<=", operator.le), (">", operator.gt), ("<", operator.lt)])

ContactStats = namedtuple("ContactStats", ["sequence_id", "binding_time_ns", "mean_contacts", "var_contacts"])
NotBound = namedtuple("NotBound", ["sequence_id", "frames"])

# ~~~~~~~~~~~~~~CONFIG~~~~~~~~~~~~~~#


class ScreenConfig:
    def __init__(
        self,
        amp_logit: float = 7.944,
        toxic_logit: float = -1.573,
        broad_logit: float = -7.323,
        struct_logit: float = -5.382,
        ppl_max: float = 16.04,
        contact_var_max: float = 2.0,
        contact_mean_min: float = 5.0,
        binding_time_max_ns: float = 500.0,
        gap_tolerance: float = 0.05,
        directions: str = DEFAULT_DIRECTIONS,
        stages: [str] = list(STAGES),
    ):
        """
        Screening thresholds
        * amp_logit
            AMP classifier logit threshold
        * toxic_logit
            Toxicity classifier logit threshold
        * broad_logit
            Broad-spectrum classifier logit threshold
        * struct_logit
            Structure classifier logit threshold
        * ppl_max
            Highest accepted language model perplexity
        * contact_var_max
            Highest accepted variance of contacts after binding
        * contact_mean_min
            Lowest accepted mean number of contacts after binding
        * binding_time_max_ns
            Binding must happen strictly before this time
        * gap_tolerance
            Fraction of frames without contact tolerated after binding
        * directions
            Comparison of each stage score with its threshold (`stage<op>` items, comma separated)
        * stages
            Stages to apply, in order
        """
        self.amp_logit = amp_logit
        self.toxic_logit = toxic_logit
        self.broad_logit = broad_logit
        self.struct_logit = struct_logit
        self.ppl_max = ppl_max
        self.contact_var_max = contact_var_max
        self.contact_mean_min = contact_mean_min
        self.binding_time_max_ns = binding_time_max_ns
        self.gap_tolerance = gap_tolerance
        self.directions = parse_directions(directions)
        self.stages = [s.strip().lower() for s in (stages.split(",") if isinstance(stages, str) else stages)]

        for name in ("amp_logit", "toxic_logit", "broad_logit", "struct_logit", "ppl_max", "contact_var_max", "contact_mean_min", "binding_time_max_ns"):
            if not np.isfinite(getattr(self, name)):
                raise ConfigError("{} must be finite".format(name))
        if contact_var_max <= 0:
            raise ConfigError("contact_var_max must be > 0")
        if not 0 <= gap_tolerance < 1:
            raise ConfigError("gap_tolerance must be in [0, 1)")
        for stage in self.stages:
            if stage not in STAGES:
                raise ConfigError("Unknown screening stage `{}`. Valid stages: {}".format(stage, ", ".join(STAGES)))

    def __repr__(self):
        return dict_to_str(self.to_dict())

    def threshold(self, stage):
        return self.ppl_max if stage == "ppl" else getattr(self, "{}_logit".format(stage))

    def passes(self, stage, score):
        return bool(COMPARATORS[self.directions[stage]](score, self.threshold(stage)))

    def to_dict(self):
        d = OrderedDict((k, getattr(self, k)) for k in make_arg_dict(ScreenConfig) if k not in ("directions", "stages"))
        d["directions"] = ",".join("{}{}".format(k, v) for k, v in self.directions.items())
        d["stages"] = list(self.stages)
        return d

    @classmethod
    def from_dict(cls, d):
        valid = make_arg_dict(cls)
        return cls(**{k: v for k, v in d.items() if k in valid})


def parse_directions(text):
    """`amp>=,toxic<` to an ordered stage -> operator map, starting from the defaults"""
    directions = OrderedDict()
    for item in (DEFAULT_DIRECTIONS + "," + text).split(","):
        item = item.strip()
        if not item:
            continue
        for op in COMPARATORS:
            if item.endswith(op):
                stage = item[: -len(op)].strip().lower()
                break
        else:
            raise ConfigError("Invalid stage direction `{}`".format(item))
        if stage not in STAGES:
            raise ConfigError("Unknown screening stage `{}` in directions".format(stage))
        directions[stage] = op
    return directions


# ~~~~~~~~~~~~~~THRESHOLD CALIBRATION~~~~~~~~~~~~~~#


def percentile_threshold(values, percentile=50.0):
    values = np.asarray(list(values), dtype=np.float64)
    if len(values) == 0:
        raise DataError("Cannot calibrate a threshold on an empty sample")
    return float(np.percentile(values, percentile))


def calibrate_threshold(clf, sequences, percentile=50.0):
    """Percentile of the classifier logits over a reference sample of sequences"""
    sequences = list(sequences)
    if not sequences:
        raise DataError("Cannot calibrate a threshold on an empty sample")
    return percentile_threshold(clf.logit_batch(sequences), percentile)


def calibrate_thresholds(classifiers, lm, sequences, config=None, attribute_percentile=50.0, ppl_percentile=25.0):
    """
    New ScreenConfig with the attribute thresholds set to the median logit and the perplexity threshold to
    the 25th percentile of the perplexities, over a reference sample (typically prior decodes)
    """
    config = config or ScreenConfig()
    d = config.to_dict()
    for stage, attribute in STAGE_ATTRIBUTES.items():
        if attribute in classifiers:
            d["{}_logit".format(stage)] = calibrate_threshold(classifiers[attribute], sequences, attribute_percentile)
    if lm is not None:
        d["ppl_max"] = percentile_threshold(lm.perplexity_batch(list(sequences)), ppl_percentile)
    return ScreenConfig.from_dict(d)


# ~~~~~~~~~~~~~~SEQUENCE SCREEN~~~~~~~~~~~~~~#


def stage_scores(stage, sequences, classifiers, lm):
    if stage == "ppl":
        if lm is None:
            raise ModelError("The ppl stage needs a language model")
        return lm.perplexity_batch(sequences)
    attribute = STAGE_ATTRIBUTES[stage]
    if attribute not in classifiers:
        raise ModelError("No sequence classifier for stage {} ({})".format(stage, attribute))
    return classifiers[attribute].logit_batch(sequences)


def screen_pipeline(candidates, classifiers, lm, config=None, include_not_novel=False, progress=False):
    """
    Apply the stages in order. Every candidate gets the score and verdict of every stage, even after a
    failure, so the attrition of any stage order can be recomputed from the verdicts.
    Returns the surviving candidates and the report {stage: {evaluated, passed}}
    """
    config = config or ScreenConfig()
    screened = [c for c in candidates if include_not_novel or c.novel]
    sequences = [c.sequence for c in screened]

    report = OrderedDict()
    report["input"] = OrderedDict([("candidates", len(candidates)), ("not_novel_excluded", len(candidates) - len(screened))])
    alive = list(screened)
    for stage in tqdm(config.stages, desc="\tStages", disable=not progress):
        scores = stage_scores(stage, sequences, classifiers, lm) if sequences else []
        for cand, score in zip(screened, scores):
            cand.add_verdict(stage, float(score), config.passes(stage, score))
        evaluated = len(alive)
        alive = [c for c in alive if c.verdicts[stage][1]]
        report[stage] = OrderedDict([("evaluated", evaluated), ("passed", len(alive))])
    return alive, report


def attrition(candidates, stages):
    """Survivor counts per stage for a given stage order, from recorded verdicts"""
    alive = list(candidates)
    counts = OrderedDict()
    for stage in stages:
        alive = [c for c in alive if c.verdicts[stage][1]]
        counts[stage] = len(alive)
    return counts


def write_verdicts(fn, candidates, stages, prov=None):
    """Per candidate verdict table: score and pass flag of every stage"""
    rows = []
    for c in candidates:
        row = OrderedDict([("id", c.id), ("sequence", c.sequence), ("accept_prob", c.accept_prob), ("novel", int(c.novel))])
        for stage in stages:
            score, passed = c.verdicts.get(stage, (np.nan, False))
            row["{}_score".format(stage)] = score
            row["{}_pass".format(stage)] = int(passed)
        row["passed"] = int(all(c.verdicts.get(s, (0, False))[1] for s in stages))
        rows.append(row)
    columns = ["id", "sequence", "accept_prob", "novel"] + ["{}_{}".format(s, f) for s in stages for f in ("score", "pass")] + ["passed"]
    df = pd.DataFrame(rows, columns=columns)
    mkbasedir(fn, exist_ok=True)
    with open(fn, "w") as fp:
        if prov:
            fp.write(provenance_line(prov))
        df.to_csv(fp, index=False, float_format="%.6f")


# ~~~~~~~~~~~~~~CONTACT SCREEN~~~~~~~~~~~~~~#


class ContactSeries:
    def __init__(self, sequence_id, times_ns, contacts, total_sim_time_ns=None):
        """
        Contacts between a peptide and the membrane along a trajectory
        * times_ns
            Frame times, strictly increasing
        * contacts
            Nonnegative contact counts (treated as opaque numbers)
        """
        self.sequence_id = sequence_id
        self.times = np.asarray(times_ns, dtype=np.float64)
        self.contacts = np.asarray(contacts, dtype=np.float64)
        if len(self.times) == 0 or len(self.times) != len(self.contacts):
            raise DataError("Contact series {}: times and contacts must be non empty and of equal length".format(sequence_id))
        if np.any(np.diff(self.times) <= 0):
            raise DataError("Contact series {}: times are not strictly increasing".format(sequence_id))
        if np.any(self.contacts < 0) or not np.all(np.isfinite(self.contacts)):
            raise DataError("Contact series {}: contacts must be finite and nonnegative".format(sequence_id))
        self.total_sim_time_ns = float(total_sim_time_ns if total_sim_time_ns is not None else self.times[-1])
        if self.total_sim_time_ns <= 0:
            raise DataError("Contact series {}: total simulation time must be > 0".format(sequence_id))

    def __len__(self):
        return len(self.times)

    def __repr__(self):
        return "ContactSeries({}, {} frames, {} ns)".format(self.sequence_id, len(self), self.total_sim_time_ns)


def binding_frame(contacts, gap_tolerance=0.05):
    """
    Index of the first frame with contact after which the frames without contact are at most
    gap_tolerance x frame count. None if the peptide never binds
    """
    bound = np.asarray(contacts) >= 1
    allowed = int(np.floor(gap_tolerance * len(bound)))
    # zero-contact frames from each frame to the end
    gaps_after = np.cumsum((~bound)[::-1])[::-1]
    ok = np.flatnonzero(bound & (gaps_after <= allowed))
    return int(ok[0]) if len(ok) else None


def contact_stats(series, gap_tolerance=0.05):
    """Binding time, then mean and population variance of the contacts over the frames after binding"""
    k = binding_frame(series.contacts, gap_tolerance)
    if k is None:
        return NotBound(series.sequence_id, len(series))
    post = series.contacts[k:]
    return ContactStats(series.sequence_id, float(series.times[k]), float(post.mean()), float(post.var()))


def simscreen_filter(stats, config=None):
    """Returns (passed, reason). Reasons: not_bound, binding_time, mean_contacts, var_contacts, or None"""
    config = config or ScreenConfig()
    if isinstance(stats, NotBound):
        return False, "not_bound"
    if not stats.binding_time_ns < config.binding_time_max_ns:
        return False, "binding_time"
    if not stats.mean_contacts >= config.contact_mean_min:
        return False, "mean_contacts"
    if not stats.var_contacts <= config.contact_var_max:
        return False, "var_contacts"
    return True, None


def variance_rule_confusion(stats_list, labels, config=None, full_rule=False):
    """
    Confusion of the contact rule against known activity labels (1 active, 0 inactive). By default only the
    variance cutoff is applied; full_rule uses the whole simscreen_filter
    """
    config = config or ScreenConfig()
    c = Counter()
    for stats, label in zip(stats_list, labels):
        if full_rule:
            predicted = simscreen_filter(stats, config)[0]
        else:
            predicted = not isinstance(stats, NotBound) and stats.var_contacts <= config.contact_var_max
        c[("tp" if label else "fp") if predicted else ("fn" if label else "tn")] += 1
    d = OrderedDict((k, c[k]) for k in ("tp", "fp", "tn", "fn"))
    d["sensitivity"] = d["tp"] / (d["tp"] + d["fn"]) if d["tp"] + d["fn"] else None
    d["specificity"] = d["tn"] / (d["tn"] + d["fp"]) if d["tn"] + d["fp"] else None
    return d


def load_contact_series(fn, sequence_id=None):
    """Read a `time_ns,contacts` CSV"""
    check_readable(fn, "Contact file")
    try:
        df = pd.read_csv(fn, comment="#")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as E:
        raise MalformedRowError(fn, 0, str(E))
    for col in ("time_ns", "contacts"):
        if col not in df.columns:
            raise MalformedRowError(fn, 0, "missing `{}` column".format(col))
    for col in ("time_ns", "contacts"):
        values = pd.to_numeric(df[col], errors="coerce")
        bad = np.flatnonzero(values.isna().values)
        if len(bad):
            raise MalformedRowError(fn, int(bad[0]) + 1, "non numeric {}".format(col))
    sequence_id = sequence_id or os.path.basename(fn).split(".")[0]
    return ContactSeries(sequence_id, df["time_ns"].values, df["contacts"].values)


def load_contact_manifest(fn):
    """Read a `sequence_id,path` manifest. Relative paths are resolved against the manifest directory"""
    check_readable(fn, "Contact manifest")
    df = pd.read_csv(fn, dtype=str, keep_default_na=False, comment="#")
    for col in ("sequence_id", "path"):
        if col not in df.columns:
            raise MalformedRowError(fn, 0, "missing `{}` column".format(col))
    base = os.path.dirname(os.path.abspath(fn))
    res = []
    for i, (seq_id, path) in enumerate(zip(df["sequence_id"], df["path"]), 1):
        if not seq_id or not path:
            raise MalformedRowError(fn, i, "empty field")
        res.append((seq_id, path if os.path.isabs(path) else os.path.join(base, path)))
    return res
