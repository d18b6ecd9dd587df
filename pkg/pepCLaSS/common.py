# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
import sys
import os
import inspect
from collections import *
import datetime
import logging
import json
import gzip
import hashlib
import argparse

# Local imports
from pepCLaSS import __version__ as pkg_version
from pepCLaSS import __name__ as pkg_name

# Third party imports
import colorlog

# ~~~~~~~~~~~~~~FUNCTIONS~~~~~~~~~~~~~~#
def opt_summary(local_opt):
    """Simplifiy option dict creation"""
    d = OrderedDict()
    d["Package name"] = pkg_name
    d["Package version"] = pkg_version
    d["Timestamp"] = str(datetime.datetime.now())
    for i, j in local_opt.items():
        if not i.startswith("_"):
            d[i] = j
    return d


def str_join(l, sep="\t", line_end=""):
    """Join a list of mixed types into a single str"""
    s = sep.join(map(str, l)) + line_end
    return s


def file_readable(fn, **kwargs):
    """Check if the file is readable"""
    return os.path.isfile(fn) and os.access(fn, os.R_OK)


def check_readable(fn, label="Input file"):
    """Raise a DataError if the file cannot be read"""
    if not fn or not file_readable(fn):
        raise DataError("{} `{}` does not exist or is not readable".format(label, fn))
    return fn


def mkdir(fn, exist_ok=False):
    """ Create directory recursivelly. Raise IO error if path exist or if error at creation """
    try:
        os.makedirs(fn, exist_ok=exist_ok)
    except OSError:
        raise DataError("Error creating output folder `{}`".format(fn))


def mkbasedir(fn, exist_ok=False):
    """ Create directory for a given file recursivelly. Raise IO error if path exist or if error at creation """
    dir_fn = os.path.dirname(fn)
    if dir_fn:
        mkdir(dir_fn, exist_ok=True)


def open_fn(fn, mode="r"):
    """Open plain or gzipped text files"""
    if fn.endswith(".gz"):
        return gzip.open(fn, mode + "t")
    return open(fn, mode)


def dict_to_str(d, sep="\t", nsep=0, exclude_list=[]):
    """Multilevel dict (or Counter, most common first) to an indented `key: value` str"""
    items = d.most_common() if isinstance(d, Counter) else d.items()
    lines = []
    for i, j in items:
        if i in exclude_list:
            continue
        if isinstance(j, dict):
            lines.append("{}{}".format(sep * nsep, i))
            sub = dict_to_str(j, sep=sep, nsep=nsep + 1)
            if sub:
                lines.append(sub)
        elif isinstance(d, Counter):
            lines.append("{}{}: {:,}".format(sep * nsep, i, j))
        else:
            lines.append("{}{}: {}".format(sep * nsep, i, j))
    return "\n".join(lines)


def _split_docstring(func):
    """Description lines and `* name` option blocks of a docstring"""
    description, options, lab = [], OrderedDict(), None
    for l in (inspect.getdoc(func) or "").split("\n"):
        l = l.strip()
        if not l:
            continue
        if l.startswith("*"):
            lab = l[1:].strip()
            options[lab] = []
        elif lab:
            options[lab].append(l)
        else:
            description.append(l)
    return " ".join(description), OrderedDict((k, " ".join(v)) for k, v in options.items())


def doc_func(func):
    """Parse the function description string"""
    if inspect.isclass(func):
        func = func.__init__
    return _split_docstring(func)[0]


def make_arg_dict(func):
    """Parse the arguments default value, type and doc"""
    if inspect.isclass(func):
        func = func.__init__
    if not (inspect.isfunction(func) or inspect.ismethod(func)):
        return None

    doc = _split_docstring(func)[1]
    d = OrderedDict()
    for name, p in inspect.signature(func).parameters.items():
        if name in ("self", "cls"):
            continue
        d[name] = OrderedDict()
        if name in ("kwargs", "args"):
            continue
        if p.annotation != inspect._empty:
            d[name]["type"] = p.annotation
        if p.default == inspect._empty:
            d[name]["required"] = True
        else:
            d[name]["default"] = p.default
        if name in doc:
            d[name]["help"] = doc[name]
    return d


def arg_from_docstr(parser, func, arg_name, short_name=None):
    """
    Get options corresponding to argument name from docstring and deal with special cases.
    Defaults are displayed in the help but not injected in the namespace, so that values coming
    from a config file are only overridden by flags that were really given.
    """

    if short_name:
        arg_names = ["-{}".format(short_name), "--{}".format(arg_name)]
    else:
        arg_names = ["--{}".format(arg_name)]

    arg_dict = make_arg_dict(func)[arg_name]
    if "help" in arg_dict:
        if "default" in arg_dict:
            if arg_dict["default"] in ("", [], None):
                arg_dict["help"] += " (default: None)"
            else:
                arg_dict["help"] += " (default: {})".format(arg_dict["default"])
        else:
            arg_dict["help"] += " (required)"

        if "type" in arg_dict:
            arg_dict["help"] += " [%(type)s]"

    if "default" in arg_dict:
        default = arg_dict.pop("default")
        arg_dict["default"] = argparse.SUPPRESS
    else:
        default = None

    # Special case for boolean args
    if arg_dict.get("type") == bool:
        arg_dict["action"] = "store_false" if default == True else "store_true"
        del arg_dict["type"]

    # Special case for lists args
    elif isinstance(arg_dict.get("type"), list):
        arg_dict["nargs"] = "*"
        arg_dict["type"] = arg_dict["type"][0]

    parser.add_argument(*arg_names, **arg_dict)


def get_logger(name=None, verbose=False, quiet=False):
    """Multilevel colored log using colorlog"""

    # Define conditional color formatter
    formatter = colorlog.LevelFormatter(
        fmt={
            "DEBUG": "%(log_color)s\t[DEBUG]: %(msg)s",
            "INFO": "%(log_color)s\t%(msg)s",
            "WARNING": "%(log_color)s## %(msg)s ##",
            "ERROR": "%(log_color)sERROR: %(msg)s",
            "CRITICAL": "%(log_color)sCRITICAL: %(msg)s",
        },
        log_colors={
            "DEBUG": "white",
            "INFO": "green",
            "WARNING": "bold_blue",
            "ERROR": "bold_red",
            "CRITICAL": "bold_purple",
        },
        reset=True,
    )

    # Define logger with custom formatter
    logging.basicConfig(format="%(message)s")
    logging.getLogger().handlers[0].setFormatter(formatter)
    log = logging.getLogger(name)

    # Define logging level depending on verbosity
    if verbose:
        log.setLevel(logging.DEBUG)
    elif quiet:
        log.setLevel(logging.WARNING)
    else:
        log.setLevel(logging.INFO)

    return log


def log_dict(d, logger, header="", indent="\t", level=1):
    """ log a multilevel dict """
    if header:
        logger(header)
    if isinstance(d, Counter):
        for i, j in d.most_common():
            logger("{}{}: {:,}".format(indent * level, i, j))
    else:
        for i, j in d.items():
            if isinstance(j, dict):
                logger("{}{}".format(indent * level, i, j))
                log_dict(j, logger, level=level + 1)
            else:
                logger("{}{}: {}".format(indent * level, i, j))


def log_list(l, logger, header="", indent="\t"):
    """ log a list """
    if header:
        logger(header)
    for i in l:
        logger("{}*{}".format(indent, i))


def sha256_file(fn):
    """Compute sha256 hash for a given file"""
    hash_sha = hashlib.sha256()
    with open(fn, "rb") as f:
        for chunk in iter(lambda: f.read(4096), b""):
            hash_sha.update(chunk)
    return hash_sha.hexdigest()


# ~~~~~~~~~~~~~~ARTIFACT PROVENANCE~~~~~~~~~~~~~~#
def provenance(config_hash, seed):
    """Metadata block embedded in every artifact"""
    d = OrderedDict()
    d["tool_version"] = "{} {}".format(pkg_name, pkg_version)
    d["config_hash"] = config_hash
    d["seed"] = seed
    return d


def provenance_line(prov):
    """Comment line written at the top of CSV/TSV artifacts"""
    return "# " + " ".join("{}={}".format(k, str(v).replace(" ", "_")) for k, v in prov.items()) + "\n"


def read_provenance(fn):
    """Get the provenance dict of any artifact written by the package"""
    if fn.endswith(".json"):
        with open(fn) as fp:
            return json.load(fp).get("provenance")
    if fn.endswith((".fa", ".fasta", ".fa.gz", ".fasta.gz")):
        sidecar = fn + ".json"
        if not file_readable(sidecar):
            return None
        with open(sidecar) as fp:
            return json.load(fp).get("provenance")
    with open_fn(fn) as fp:
        line = fp.readline()
    if not line.startswith("# "):
        return None
    prov = OrderedDict()
    for field in line[2:].split():
        key, _, val = field.partition("=")
        prov[key] = val
    prov["tool_version"] = prov.get("tool_version", "").replace("_", " ")
    return prov


def write_json(fn, d, prov=None):
    """Write a json artifact, keys in insertion order so that reruns are byte identical"""
    mkbasedir(fn, exist_ok=True)
    if prov is not None:
        d = OrderedDict([("provenance", prov)] + list(d.items()))
    with open(fn, "w") as fp:
        json.dump(d, fp, indent=2, default=_json_default)
        fp.write("\n")


def _json_default(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError("Object of type {} is not JSON serializable".format(type(obj).__name__))


# ~~~~~~~~~~~~~~CUSTOM EXCEPTION AND WARN CLASSES~~~~~~~~~~~~~~#
class pepCLaSSError(Exception):
    """ Basic exception class for pepCLaSS package """

    exit_code = 1

    def to_json(self, subcommand=None):
        d = OrderedDict()
        d["error"] = type(self).__name__
        d["message"] = str(self)
        d["exit_code"] = self.exit_code
        d["subcommand"] = subcommand
        return json.dumps(d)


class ConfigError(pepCLaSSError):
    """Invalid configuration or option values"""

    exit_code = 2


class DataError(pepCLaSSError):
    """Missing, unreadable or malformed input data"""

    exit_code = 3


class ModelError(pepCLaSSError):
    """Model training, loading or inference failure"""

    exit_code = 4


class MalformedRowError(DataError):
    def __init__(self, fn, row_index, reason):
        self.fn = fn
        self.row_index = row_index
        super().__init__("Malformed row {} in `{}`: {}".format(row_index, fn, reason))


class UnknownAttributeError(DataError):
    pass


class SingleClassError(DataError):
    pass


class NonFiniteError(ModelError):
    pass


class DegenerateComponentError(ModelError):
    pass


class UnrealizableAttributeCombination(ModelError):
    """No latent point was accepted for the requested attribute combination"""

    pass
