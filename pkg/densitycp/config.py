"""Run configuration of the command-line interface.

A configuration file is TOML with a ``[global]`` table and one table per subcommand::

    [global]
    seed = 20240611
    output_dir = "results"

    [survival]
    lambda = 3.3
    a = 0.0
    init = "single"

Keys are the long flag names with dashes replaced by underscores. Values are resolved in the
order built-in defaults, configuration file, environment (``DENSITYCP_OUTPUT_DIR`` for the
output directory only), command-line flags; the last one that sets a key wins.
"""
import logging
import math
import os
from collections import namedtuple

import numpy as np
import toml

from densitycp.exceptions import ConfigError

logger = logging.getLogger(__name__)

ENV_OUTPUT_DIR = "DENSITYCP_OUTPUT_DIR"
REQUIRED = object()

Option = namedtuple("Option", ["name", "convert", "default", "help", "choices"])
Option.__new__.__defaults__ = (None,)


def parse_float(value):
    """Float from a number or a string; ``"-inf"`` is accepted for the hard-core limit."""
    if isinstance(value, bool):
        raise ValueError(value)
    result = float(value)
    if math.isnan(result):
        raise ValueError(value)
    return result


def parse_int(value):
    if isinstance(value, bool):
        raise ValueError(value)
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(value)
        return int(value)
    return int(str(value).strip())


def parse_bool(value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(value)


def parse_grid(value):
    """Expand a grid given as ``start:stop:step``, a comma list, a number or a TOML array.

    ``start:stop:step`` includes ``stop`` when it lies within half a step of the last point.

    Returns:
        list[float]
    """
    if isinstance(value, (list, tuple)):
        return [parse_float(v) for v in value]
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [parse_float(value)]
    text = str(value).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(value)
        start, stop, step = (parse_float(p) for p in parts)
        if step == 0 or (stop - start) * step < 0:
            raise ValueError(value)
        count = int(math.floor((stop - start) / step + 0.5))
        return [float(v) for v in start + step * np.arange(count + 1)]
    if not text:
        raise ValueError(value)
    return [parse_float(p) for p in text.split(",")]


def parse_str(value):
    if not isinstance(value, str):
        raise ValueError(value)
    return value


def parse_level(value):
    return parse_str(value).upper()


def optional(convert):
    """Converter that maps ``None``, ``""`` and ``"none"`` to ``None``."""

    def inner(value):
        if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none")):
            return None
        return convert(value)

    inner.__name__ = getattr(convert, "__name__", "optional")
    return inner


GLOBAL_OPTIONS = [
    Option("seed", optional(parse_int), None, "experiment seed; drawn and printed when omitted"),
    Option("output_dir", parse_str, "results", "directory that receives one folder per subcommand"),
    Option("workers", parse_int, 1, "parallel replicate workers (results do not depend on it)"),
    Option("log_level", parse_level, "INFO", "logging level", ("DEBUG", "INFO", "WARNING", "ERROR")),
    Option("progress", parse_bool, False, "show a progress bar over replicate batches"),
]

_MODEL = [
    Option("a", parse_float, 0.0, "payoff coefficient, -inf for the hard-core limit"),
    Option("d", parse_int, 1, "lattice dimension"),
    Option("side", optional(parse_int), None, "torus side length (400 for d=1, 128 for d=2)"),
    Option("init", parse_str, "single", "initial configuration", ("single", "full", "box")),
]

SECTIONS = {
    "simulate": [
        Option("lambda", parse_float, REQUIRED, "natural birth rate"),
        *_MODEL,
        Option("variant", optional(parse_str), None, "birth-rate rule", ("standard", "floor", "hardcore")),
        Option("boundary", parse_str, "periodic", "torus boundary", ("periodic", "frozen")),
        Option("horizon", parse_float, 2000.0, "final time"),
        Option("stop_on_extinction", parse_bool, True, "stop as soon as the configuration is empty"),
        Option("population_cap", optional(parse_int), None, "stop at this population"),
        Option("escape_radius", optional(parse_int), None, "stop once a birth lands this far out"),
        Option("snapshot", optional(parse_grid), None, "snapshot times"),
        Option("record_every", optional(parse_float), None, "trajectory grid spacing (horizon/100)"),
        Option("skip_null_births", parse_bool, False, "sample only births that change the state"),
        Option("replicate", parse_int, 0, "replicate index of the stream"),
    ],
    "survival": [
        Option("lambda", parse_grid, REQUIRED, "natural birth rate, or a grid of them"),
        *_MODEL,
        Option("horizon", parse_float, 2000.0, "censoring time"),
        Option("replicates", parse_int, 200, "replicates per estimate"),
        Option("escape_radius", optional(parse_int), None, "count escapes to this radius as survival"),
    ],
    "phase": [
        Option("lambda", parse_grid, REQUIRED, "grid of birth rates"),
        Option("a", parse_grid, REQUIRED, "grid of payoff coefficients"),
        Option("d", parse_int, 1, "lattice dimension"),
        Option("side", optional(parse_int), None, "torus side length"),
        Option("init", parse_str, "single", "initial configuration", ("single", "full", "box")),
        Option("horizon", parse_float, 2000.0, "censoring time"),
        Option("replicates", parse_int, 200, "replicates per cell"),
        Option("coupled", parse_bool, True, "drive every cell from one graphical representation"),
        Option("max_dominating_rate", parse_float, 1e3, "fall back to independent cells above this rate"),
    ],
    "lambda-c": [
        Option("a", parse_grid, REQUIRED, "payoff coefficient, or a grid of them"),
        Option("d", parse_int, 1, "lattice dimension"),
        Option("side", optional(parse_int), None, "torus side length"),
        Option("horizon", parse_float, 2000.0, "censoring time"),
        Option("replicates", parse_int, 200, "replicates per evaluation"),
        Option("threshold", parse_float, 0.02, "survival level that defines the crossing"),
        Option("lo", parse_float, 0.25, "lower end of the starting bracket"),
        Option("hi", parse_float, 8.0, "upper end of the starting bracket"),
        Option("width", parse_float, 0.05, "stop bisecting below this bracket width"),
        Option("lambda_c0", optional(parse_float), None, "critical value at a=0 for the sandwich"),
    ],
    "meanfield": [
        Option("curve", parse_str, "ac", "what to compute", ("ac", "regimes", "fixed", "trajectory")),
        Option("lambda_grid", parse_grid, "0.05:0.95:0.05", "birth rates"),
        Option("a_grid", parse_grid, "0:5:0.5", "payoff coefficients"),
        Option("u0", parse_grid, "0.05,0.2,0.5,0.9", "initial densities of trajectories"),
        Option("t_end", parse_float, 50.0, "trajectory length"),
        Option("step", parse_float, 0.01, "Runge-Kutta step"),
        Option("grid_points", parse_int, 10 ** 4, "root scan resolution"),
    ],
    "couple": [
        Option("mode", parse_str, "sandwich", "which coupling", ("sandwich", "pair", "noninteracting", "perturbation")),
        Option("lambda", parse_float, REQUIRED, "birth rate"),
        Option("a", parse_float, 0.0, "payoff coefficient"),
        Option("lambda2", optional(parse_float), None, "birth rate of the larger process (pair)"),
        Option("a2", optional(parse_float), None, "payoff coefficient of the larger process (pair)"),
        Option("d", parse_int, 1, "lattice dimension"),
        Option("side", optional(parse_int), None, "torus side length"),
        Option("init", parse_str, "full", "initial configuration", ("single", "full", "box")),
        Option("horizon", parse_float, 200.0, "final time"),
        Option("trace_points", parse_int, 101, "population trace resolution"),
        Option("replicate", parse_int, 0, "replicate index of the stream"),
    ],
    "hardcore": [
        Option("lambda", parse_grid, REQUIRED, "birth rate, or a grid of them"),
        Option("replicates", parse_int, 10 ** 4, "replicates per birth rate"),
        Option("side", parse_int, 64, "ring size"),
        Option("time_points", parse_int, 41, "points of the extinction-time tail"),
    ],
    "blocks": [
        Option("kind", parse_str, "bounds", "which block event", ("doubling", "empty", "bounds")),
        Option("lambda", parse_float, REQUIRED, "birth rate"),
        Option("a", parse_grid, REQUIRED, "payoff coefficient, or a grid of them"),
        Option("epsilon", parse_float, 0.1, "tolerance of the doubling construction"),
        Option("d", parse_int, 1, "lattice dimension"),
        Option("L", parse_int, 1, "scale of the space-time block"),
        Option("side", optional(parse_int), None, "torus side for the empty-block event (8L)"),
        Option("replicates", parse_int, 2000, "replicates per estimate"),
    ],
}

# keys that never change an artifact, so they stay out of its embedded config
NON_SEMANTIC = ("output_dir", "workers", "log_level", "progress")


def options_for(section):
    if section == "global":
        return GLOBAL_OPTIONS
    try:
        return SECTIONS[section]
    except KeyError:
        raise ConfigError("unknown section: {}".format(section)) from None


def _convert(option, value):
    try:
        result = option.convert(value)
    except (TypeError, ValueError):
        raise ConfigError("invalid {}: {}".format(option.name, value)) from None
    if option.choices is not None and result is not None and result not in option.choices:
        raise ConfigError("invalid {}: {}".format(option.name, value))
    return result


def load_file(path):
    """Read and shape-check a TOML configuration file.

    Returns:
        dict: section name to table

    Raises:
        ConfigError: on unreadable files, syntax errors, unknown sections or keys
    """
    try:
        data = toml.load(str(path))
    except (OSError, toml.TomlDecodeError) as exc:
        raise ConfigError("cannot read config {}: {}".format(path, exc)) from None
    for section, table in data.items():
        known = {o.name for o in options_for(section)}
        if not isinstance(table, dict):
            raise ConfigError("section {} must be a table".format(section))
        for key in table:
            if key not in known:
                raise ConfigError("unknown key: {}.{}".format(section, key))
    return data


def draw_seed():
    """A fresh seed that fits in a TOML integer."""
    return int(np.random.SeedSequence().entropy % (2 ** 63))


def resolve(command, file_data=None, overrides=None, environ=None):
    """Merge defaults, file, environment and command-line values for one subcommand.

    Args:
        command (str): subcommand name
        file_data (dict): parsed configuration file, see :func:`load_file`
        overrides (dict): values given on the command line, unset flags omitted
        environ (Mapping): environment, ``os.environ`` by default

    Returns:
        dict: the resolved configuration, with ``command`` and every global and section key

    Raises:
        ConfigError: ``missing: <key>`` or ``invalid <key>: <value>``
    """
    file_data = file_data or {}
    overrides = overrides or {}
    environ = os.environ if environ is None else environ
    resolved = {"command": command}
    for section, options in (("global", GLOBAL_OPTIONS), (command, options_for(command))):
        table = file_data.get(section, {})
        for option in options:
            value = option.default
            if option.name in table:
                value = table[option.name]
            if section == "global" and option.name == "output_dir" and environ.get(ENV_OUTPUT_DIR):
                value = environ[ENV_OUTPUT_DIR]
            if overrides.get(option.name) is not None:
                value = overrides[option.name]
            if value is REQUIRED:
                raise ConfigError("missing: {}".format(option.name))
            resolved[option.name] = _convert(option, value) if value is not None else None
    if resolved["seed"] is None:
        resolved["seed"] = draw_seed()
        logger.debug("drew seed %d", resolved["seed"])
    if resolved["workers"] < 1:
        raise ConfigError("invalid workers: {}".format(resolved["workers"]))
    return resolved


def embedded(config):
    """The part of a resolved configuration that determines the artifacts."""
    return {k: v for k, v in config.items() if k not in NON_SEMANTIC}
