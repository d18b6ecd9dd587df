# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
from collections import namedtuple

# Third party imports
import numpy as np
import pandas as pd

# Local imports
from pepCLaSS.common import *
from pepCLaSS.analysis.scales import *

# ~~~~~~~~~~~~~~TYPES~~~~~~~~~~~~~~#

DescriptorVector = namedtuple(
    "DescriptorVector",
    [
        "charge",
        "charge_density",
        "hydrophobicity_H",
        "hydrophobic_moment_uH",
        "hydrophobic_ratio",
        "aromaticity",
        "aliphatic_index",
        "instability_index",
        "isoelectric_point",
        "gravy",
        "molecular_weight",
    ],
)

# ~~~~~~~~~~~~~~FUNCTIONS~~~~~~~~~~~~~~#


def _check_sequence(sequence):
    if not sequence:
        raise DataError("Descriptors need a non empty sequence")
    bad = set(sequence) - set(EISENBERG)
    if bad:
        raise DataError("Non natural residues {} in {}".format("".join(sorted(bad)), sequence))


def net_charge(sequence, pH=7.0, c_terminal_amidated=True):
    """Sum of Henderson-Hasselbalch partial charges of the ionizable groups"""
    pos = 1.0 / (1.0 + 10 ** (pH - PKA_N_TERM))
    neg = 0.0 if c_terminal_amidated else 1.0 / (1.0 + 10 ** (PKA_C_TERM - pH))
    for aa in sequence:
        if aa in PKA_POSITIVE:
            pos += 1.0 / (1.0 + 10 ** (pH - PKA_POSITIVE[aa]))
        elif aa in PKA_NEGATIVE:
            neg += 1.0 / (1.0 + 10 ** (PKA_NEGATIVE[aa] - pH))
    return pos - neg


def molecular_weight(sequence):
    """Residue masses minus one water per peptide bond"""
    return sum(AA_WEIGHTS[aa] for aa in sequence) - WATER_WEIGHT * (len(sequence) - 1)


def isoelectric_point(sequence, c_terminal_amidated=True, tol=1e-4):
    """pH of zero net charge, by bisection over [0, 14]"""
    lo, hi = 0.0, 14.0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if net_charge(sequence, mid, c_terminal_amidated) > 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def hydrophobic_moment(sequence, angle_deg=100.0):
    """|sum_n H_n (cos n d, sin n d)| / N on the Eisenberg scale"""
    if not sequence:
        raise DataError("Hydrophobic moment of an empty sequence")
    h = np.array([EISENBERG[aa] for aa in sequence])
    theta = np.deg2rad(angle_deg) * np.arange(len(h))
    return float(np.hypot((h * np.cos(theta)).sum(), (h * np.sin(theta)).sum()) / len(h))


def instability_index(sequence):
    """Guruprasad: 10/L times the sum of the dipeptide instability weights"""
    return 10.0 / len(sequence) * sum(DIWV[a][b] for a, b in zip(sequence, sequence[1:]))


def aliphatic_index(sequence):
    """Ikai: mole percent of A + 2.9 V + 3.9 (I + L)"""
    n = len(sequence)
    return 100.0 * (sequence.count("A") + 2.9 * sequence.count("V") + 3.9 * (sequence.count("I") + sequence.count("L"))) / n


def gravy(sequence):
    return float(np.mean([KYTE_DOOLITTLE[aa] for aa in sequence]))


def descriptors(sequence, c_terminal_amidated=True, pH=7.0, angle_deg=100.0):
    """Physicochemical panel of a peptide. Charge and pI assume an amidated C-terminus unless told otherwise"""
    _check_sequence(sequence)
    n = len(sequence)
    charge = net_charge(sequence, pH, c_terminal_amidated)
    mw = molecular_weight(sequence)
    return DescriptorVector(
        charge=charge,
        charge_density=charge / mw,
        hydrophobicity_H=float(np.mean([EISENBERG[aa] for aa in sequence])),
        hydrophobic_moment_uH=hydrophobic_moment(sequence, angle_deg),
        hydrophobic_ratio=sum(aa in HYDROPHOBIC_RESIDUES for aa in sequence) / n,
        aromaticity=sum(aa in AROMATIC_RESIDUES for aa in sequence) / n,
        aliphatic_index=aliphatic_index(sequence),
        instability_index=instability_index(sequence),
        isoelectric_point=isoelectric_point(sequence, c_terminal_amidated),
        gravy=gravy(sequence),
        molecular_weight=mw,
    )


def descriptors_table(sequences, ids=None, c_terminal_amidated=True, pH=7.0):
    """One row per sequence, columns in DescriptorVector order after id, sequence and length"""
    sequences = list(sequences)
    ids = list(ids) if ids is not None else ["seq_{}".format(i) for i in range(len(sequences))]
    rows = []
    for seq_id, seq in zip(ids, sequences):
        rows.append([seq_id, seq, len(seq)] + list(descriptors(seq, c_terminal_amidated, pH)))
    return pd.DataFrame(rows, columns=["id", "sequence", "length"] + list(DescriptorVector._fields))
