# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~#
# Standard library imports
import inspect
import json
import hashlib
from collections import OrderedDict

# Local imports
from pepCLaSS.common import *

# ~~~~~~~~~~~~~~CLASS~~~~~~~~~~~~~~#


class PipelineConfig:
    def __init__(self, config_fn=None, verbose=False, quiet=False):
        """
        Flat `key = value` configuration file shared by all the subcommands of a pipeline run.
        * config_fn
            Path to the config file. Lines starting with `#` and blank lines are skipped.
        """
        self.log = get_logger(name="pepCLaSS_Config", verbose=verbose, quiet=quiet)
        self.config_fn = config_fn
        self.file_opt = OrderedDict()
        self.overrides = OrderedDict()
        if config_fn:
            self.file_opt = self._parse(config_fn)
            self.log.debug("Loaded {} keys from config file {}".format(len(self.file_opt), config_fn))

    def __repr__(self):
        return dict_to_str(self.file_opt)

    def __contains__(self, key):
        return key in self.file_opt

    # ~~~~~~~~~~~~~~PUBLIC METHODS~~~~~~~~~~~~~~#

    def resolve(self, func, local_opt, explicit=None):
        """
        Merge function defaults, config file values and explicitly passed values (in this order of precedence)
        * func
            Subcommand function whose signature defines the option names and types
        * local_opt
            Values received by the function
        * explicit
            Names of the options given on the command line. If None every value that differs from the
            function default is considered explicit
        """
        arg_dict = make_arg_dict(func)
        opt = OrderedDict()

        for name, arg in arg_dict.items():
            if name in ("kwargs", "args", "config_fn"):
                continue
            value = local_opt.get(name, arg.get("default"))
            if explicit is None:
                is_explicit = "default" not in arg or value != arg["default"]
            else:
                is_explicit = name in explicit
            if is_explicit:
                opt[name] = value
                if name in self.file_opt:
                    self.overrides[name] = value
            elif name in self.file_opt:
                opt[name] = cast_value(self.file_opt[name], arg.get("type", str), name)
            else:
                opt[name] = arg.get("default")

        unused = [k for k in self.file_opt if k not in arg_dict]
        if unused:
            self.log.debug("Config keys not used by {}: {}".format(func.__name__, ", ".join(unused)))
        return opt

    @property
    def config_hash(self):
        """sha256 of the canonical config mapping (with explicit overrides of file keys), 16 hex characters"""
        d = OrderedDict(self.file_opt)
        for key, value in self.overrides.items():
            d[key] = format_value(value)
        canonical = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    # ~~~~~~~~~~~~~~PRIVATE METHODS~~~~~~~~~~~~~~#

    def _parse(self, config_fn):
        check_readable(config_fn, "Config file")
        d = OrderedDict()
        with open(config_fn) as fp:
            for line_num, line in enumerate(fp, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if not "=" in line:
                    raise ConfigError("Invalid config line {} in `{}`: expected `key = value`".format(line_num, config_fn))
                key, _, value = line.partition("=")
                key = key.strip()
                if not key:
                    raise ConfigError("Empty key at config line {} in `{}`".format(line_num, config_fn))
                if key in d:
                    raise ConfigError("Duplicated config key `{}` in `{}`".format(key, config_fn))
                d[key] = value.strip()
        return d


# ~~~~~~~~~~~~~~FUNCTIONS~~~~~~~~~~~~~~#


def cast_value(raw, type_, name):
    """Cast a raw config string to the type declared in the subcommand signature"""
    try:
        if isinstance(type_, list):
            return [cast_value(i.strip(), type_[0], name) for i in raw.split(",") if i.strip()]
        if type_ == bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if raw.lower() in ("none", ""):
            return None
        return type_(raw)
    except (TypeError, ValueError):
        raise ConfigError("Invalid value `{}` for config key `{}`".format(raw, name))


def format_value(value):
    """Inverse of cast_value, used to hash overridden values"""
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def init_command(func, local_opt, name, config_classes=()):
    """
    Common preamble of every subcommand: resolve options, create the logger and log the option summary.
    * config_classes
        Hyperparameter classes whose constructor options are also resolved, from the extra keyword
        arguments of the subcommand and the config file
    Returns the resolved options, the logger and the provenance block.
    """
    kwargs = local_opt.get("kwargs", {})
    explicit = kwargs.get("explicit_args")
    verbose = local_opt.get("verbose", False)
    quiet = local_opt.get("quiet", False)
    cfg = PipelineConfig(local_opt.get("config_fn"), verbose=verbose, quiet=quiet)
    opt = cfg.resolve(func, local_opt, explicit=explicit)
    for cls in config_classes:
        cls_opt = dict(kwargs)
        cls_opt.update((k, v) for k, v in opt.items())
        for key, value in cfg.resolve(cls, cls_opt, explicit=explicit).items():
            opt.setdefault(key, value)

    log = get_logger(name=name, verbose=opt.get("verbose", verbose), quiet=opt.get("quiet", quiet))
    log.warning("Checking options and input files")
    log_dict(opt_summary(local_opt=opt), log.debug, "Options summary")

    prov = provenance(config_hash=cfg.config_hash, seed=opt.get("seed"))
    log.debug("Config hash: {}".format(prov["config_hash"]))
    return opt, log, prov


def build_config(cls, opt):
    """Instantiate a hyperparameter class from resolved options"""
    return cls(**{k: opt[k] for k in make_arg_dict(cls) if k in opt})
