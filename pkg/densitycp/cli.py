"""Command line: ``python -m densitycp <subcommand> [options]``.

Every subcommand resolves its configuration (see :mod:`densitycp.config`), prints the seed it
runs with, and writes its artifacts plus ``manifest.json`` into ``<output_dir>/<subcommand>``.
Exit codes are 0 on success, 2 for configuration and usage errors and 3 for any other error
raised by the package.
"""
import argparse
import logging
import math
import os
import sys

from densitycp import __version__, bounds, coupling, experiments, meanfield
from densitycp.config import GLOBAL_OPTIONS, SECTIONS, load_file, resolve
from densitycp.engine import (
    CombinedRecorder,
    SimState,
    SnapshotRecorder,
    StopRule,
    TrajectoryRecorder,
    run,
)
from densitycp.exceptions import ConfigError, DensityCPError
from densitycp.io import ArtifactWriter
from densitycp.lattice import Boundary, Params, TorusGeometry

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

COUPLING_MODES = ("sandwich", "pair", "noninteracting", "perturbation")


def _flag(name):
    return "--" + name.replace("_", "-")


def _add_options(parser, options):
    for option in options:
        kwargs = {"dest": option.name, "default": argparse.SUPPRESS, "help": option.help}
        if option.default is False or option.default is True:
            kwargs.update(nargs="?", const="true", metavar="BOOL")
        if option.choices:
            kwargs["help"] = "{} ({})".format(option.help, ", ".join(option.choices))
        parser.add_argument(_flag(option.name), **kwargs)


def build_parser():
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="TOML configuration file")
    _add_options(common, GLOBAL_OPTIONS)

    parser = argparse.ArgumentParser(
        prog="densitycp",
        description="Contact process with density-dependent birth rate",
        allow_abbrev=False,
    )
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    subparsers = parser.add_subparsers(dest="command", metavar="subcommand")
    subparsers.required = True
    for command, options in SECTIONS.items():
        sub = subparsers.add_parser(command, parents=[common], allow_abbrev=False, help=HANDLERS[command].__doc__)
        _add_options(sub, options)
        if command == "couple":
            for mode in COUPLING_MODES:
                sub.add_argument(
                    "--" + mode, dest="mode", action="store_const", const=mode,
                    default=argparse.SUPPRESS, help="same as --mode {}".format(mode),
                )
    return parser


def _attach_values(argv, parser):
    """Glue values that start with ``-`` (``-inf``, ``-3:3:1``) to their flag."""
    flags = set()
    parsers = [parser]
    while parsers:
        current = parsers.pop()
        for action in current._actions:
            flags.update(action.option_strings)
            if isinstance(action, argparse._SubParsersAction):
                parsers.extend(action.choices.values())
    argv = list(argv)
    merged = []
    i = 0
    while i < len(argv):
        token = argv[i]
        following = argv[i + 1] if i + 1 < len(argv) else None
        if (
            token.startswith("--")
            and "=" not in token
            and following is not None
            and following.startswith("-")
            and following not in flags
            and len(following) > 1
        ):
            merged.append("{}={}".format(token, following))
            i += 2
            continue
        merged.append(token)
        i += 1
    return merged


def configure_logging(level):
    logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT, stream=sys.stderr, force=True)


def _geometry(config, boundary=Boundary.PERIODIC):
    side = config.get("side") or experiments.DEFAULT_SIDE.get(config["d"], 32)
    return TorusGeometry.cube(side, config["d"], boundary)


def _model(config):
    lam, a, d = config["lambda"], config["a"], config["d"]
    variant = config.get("variant")
    if variant == "hardcore":
        return Params.hardcore(lam, d)
    if variant == "floor":
        return Params.floor_rate(lam, a, d)
    return Params(lam, a, d)


def _common(config):
    return {"workers": config["workers"], "progress": config["progress"]}


def cmd_simulate(config, writer):
    """Run the chain once and write its trajectory, snapshots and outcome."""
    params = _model(config)
    geo = _geometry(config, Boundary(config["boundary"]))
    horizon = config["horizon"]
    record_every = config["record_every"]
    if record_every is not None and not (record_every > 0 and math.isfinite(record_every)):
        raise ConfigError("invalid record_every: {}".format(record_every))
    if horizon < 0:
        raise ConfigError("invalid horizon: {}".format(horizon))
    state = SimState.create(
        params,
        geo,
        experiments.initial_sites(config["init"], geo),
        config["seed"],
        config["replicate"],
        skip_null_births=config["skip_null_births"],
    )
    trajectory = TrajectoryRecorder.every(record_every, horizon)
    snapshots = SnapshotRecorder(config["snapshot"] or [], raster=geo.dim == 2)
    stop = StopRule(
        horizon=horizon if math.isfinite(horizon) else None,
        stop_on_extinction=config["stop_on_extinction"],
        population_cap=config["population_cap"],
        escape_radius=config["escape_radius"],
    )
    outcome = run(state, stop, CombinedRecorder(trajectory, snapshots))
    writer.csv("trajectory.csv", TrajectoryRecorder.columns, trajectory.rows)
    for i, shot in enumerate(snapshots.snapshots):
        writer.text("snapshot_{:03d}.txt".format(i), shot.dump)
        if shot.raster is not None:
            writer.raster("snapshot_{:03d}.pgm".format(i), shot.raster)
    writer.json("outcome.json", outcome.to_dict())
    logger.info("simulate: %s at t=%r, population %d", outcome.reason.value, outcome.final_time,
                outcome.final_population)


def cmd_survival(config, writer):
    """Estimate survival probabilities at the horizon."""
    geo = experiments.default_geometry(config["d"], config["side"])
    rows = []
    for lam in config["lambda"]:
        estimate = experiments.estimate_survival(
            Params(lam, config["a"], config["d"]), geo, config["init"], config["horizon"],
            config["replicates"], config["seed"], escape_radius=config["escape_radius"], **_common(config)
        )
        rows.append((lam, config["a"], estimate.value, estimate.ci_low, estimate.ci_high, estimate.replicates))
    writer.csv("survival.csv", ("lambda", "a", "estimate", "ci_low", "ci_high", "replicates"), rows)


def cmd_phase(config, writer):
    """Scan survival over a (lambda, a) grid."""
    geo = experiments.default_geometry(config["d"], config["side"])
    scan = experiments.phase_scan(
        config["lambda"], config["a"], config["d"], geo, config["horizon"], config["replicates"],
        config["seed"], init=config["init"], coupled=config["coupled"],
        max_dominating_rate=config["max_dominating_rate"], **_common(config)
    )
    writer.csv(
        "phase.csv",
        ("i", "j", "lambda", "a", "estimate", "ci_low", "ci_high", "replicates"),
        scan.rows(),
    )


def cmd_lambda_c(config, writer):
    """Bracket the critical birth rate for each payoff coefficient."""
    geo = experiments.default_geometry(config["d"], config["side"])
    grid = config["a"]
    lambda_c0 = config["lambda_c0"]
    order = sorted(range(len(grid)), key=lambda k: grid[k] != 0.0)
    brackets = {}
    for k in order:
        bracket = experiments.estimate_lambda_c(
            grid[k], config["d"], geo, config["horizon"], config["replicates"], config["seed"],
            threshold=config["threshold"], lo=config["lo"], hi=config["hi"], width=config["width"],
            lambda_c0=lambda_c0, **_common(config)
        )
        lambda_c0 = bracket.lambda_c0
        brackets[k] = bracket
    rows = []
    for k in range(len(grid)):
        b = brackets[k]
        rows.append((b.a, b.lo, b.hi, b.midpoint, b.sandwich[0], b.sandwich[1], b.lambda_c0,
                     b.threshold, b.replicates, b.horizon))
    writer.csv(
        "lambda_c.csv",
        ("a", "lo", "hi", "midpoint", "sandwich_lo", "sandwich_hi", "lambda_c0", "threshold",
         "replicates", "horizon"),
        rows,
    )


def cmd_meanfield(config, writer):
    """Mean-field curves: critical payoff, regimes, fixed points or trajectories."""
    curve = config["curve"]
    if curve == "ac":
        rows = []
        for lam in config["lambda_grid"]:
            point = meanfield.bistability_point(lam)
            rows.append((lam, point.a_c, point.x_lambda, point.u0))
        writer.csv("critical_curve.csv", ("lambda", "a_c", "x_lambda", "u0"), rows)
    elif curve == "regimes":
        rows = meanfield.regime_table(config["lambda_grid"], config["a_grid"], config["grid_points"])
        writer.csv("regimes.csv", ("lambda", "a", "regime", "u_minus", "u_plus"), rows)
    elif curve == "fixed":
        rows = []
        for lam in config["lambda_grid"]:
            for a in config["a_grid"]:
                report = meanfield.fixed_points(lam, a, config["grid_points"])
                for point in report.fixed_points:
                    rows.append((lam, a, point.u, point.stability.value, report.regime.value))
        writer.csv("fixed_points.csv", ("lambda", "a", "u", "stability", "regime"), rows)
    else:
        rows = []
        for lam in config["lambda_grid"]:
            for a in config["a_grid"]:
                for u0 in config["u0"]:
                    path = meanfield.integrate(lam, a, u0, config["t_end"], config["step"])
                    stride = max(1, (len(path.times) - 1) // 100)
                    for t, u in zip(path.times[::stride], path.values[::stride]):
                        rows.append((lam, a, u0, float(t), float(u)))
        writer.csv("trajectories.csv", ("lambda", "a", "u0", "t", "u"), rows)


def _trace_rows(traces):
    labels = sorted(traces)
    if not labels:
        return ("time",), []
    rows = []
    for i, (time, _) in enumerate(traces[labels[0]]):
        rows.append([time] + [traces[label][i][1] for label in labels])
    return ("time",) + tuple(labels), rows


def cmd_couple(config, writer):
    """Run one of the couplings and report inclusion or agreement."""
    geo = experiments.default_geometry(config["d"], config["side"])
    sites = experiments.initial_sites(config["init"], geo)
    lam, a, mode = config["lambda"], config["a"], config["mode"]
    shared = dict(seed=config["seed"], replicate_id=config["replicate"], trace_points=config["trace_points"])
    if mode == "sandwich":
        report = coupling.evolve_sandwich(lam, a, geo, sites, config["horizon"], **shared)
    elif mode == "pair":
        lam2 = config["lambda2"] if config["lambda2"] is not None else lam
        a2 = config["a2"] if config["a2"] is not None else a
        report = coupling.evolve_coupled_pair(
            Params(lam, a, config["d"]), Params(lam2, a2, config["d"]), sites, sites, geo,
            config["horizon"], **shared
        )
    elif mode == "noninteracting":
        report = coupling.evolve_vs_noninteracting(sites, lam, geo, config["horizon"], a=a, **shared)
    else:
        report = coupling.evolve_perturbation(lam, a, geo, sites, config["horizon"], **shared)
    header, rows = _trace_rows(report.traces)
    writer.csv("traces.csv", header, rows)
    payload = report.to_dict()
    payload.pop("traces")
    writer.json("report.json", payload)
    violations = getattr(report, "violations", 0)
    if violations:
        logger.warning("%s coupling: %d violations", mode, violations)


def _tag(lam):
    return format(lam, "g")


def cmd_hardcore(config, writer):
    """Statistics of the hard-core limit from a single seed."""
    summary = []
    for lam in config["lambda"]:
        result = experiments.hardcore_stats(
            lam, config["replicates"], config["seed"], side=config["side"],
            time_points=config["time_points"], **_common(config)
        )
        writer.csv("tail_lambda_{}.csv".format(_tag(lam)), ("n", "empirical_tail", "geometric_tail"), result.tail)
        writer.csv(
            "time_tail_lambda_{}.csv".format(_tag(lam)),
            ("t", "empirical_tail", "direct_tail", "chernoff_bound"),
            result.time_tail,
        )
        summary.append((
            lam, result.replicates, result.chi2_statistic, result.chi2_pvalue, result.chi2_bins,
            result.ks_pvalue, result.max_excess, result.max_population, result.tail_slope,
        ))
    writer.csv(
        "hardcore.csv",
        ("lambda", "replicates", "chi2_statistic", "chi2_pvalue", "chi2_bins", "ks_pvalue",
         "max_excess", "max_population", "tail_slope"),
        summary,
    )


def cmd_blocks(config, writer):
    """Block events of the survival and extinction constructions and their closed forms."""
    lam, d, kind = config["lambda"], config["d"], config["kind"]
    rows = []
    if kind == "bounds":
        for a in config["a"]:
            rows.append(tuple(bounds.bounds(config["epsilon"], d, lam, a, config["L"])))
        writer.csv("bounds.csv", bounds.BoundRecord._fields, rows)
    elif kind == "doubling":
        for a in config["a"]:
            r = experiments.doubling_probability(lam, a, config["epsilon"], d, config["replicates"],
                                                 config["seed"], **_common(config))
            e = r.estimate
            rows.append((lam, a, config["epsilon"], r.spec.tau, e.value, e.ci_low, e.ci_high,
                         e.replicates, r.stage_bound, r.pipeline_bound, r.stage_threshold))
        writer.csv(
            "doubling.csv",
            ("lambda", "a", "epsilon", "tau", "estimate", "ci_low", "ci_high", "replicates",
             "stage_bound", "pipeline_bound", "stage_threshold"),
            rows,
        )
    else:
        for a in config["a"]:
            r = experiments.empty_block_probability(lam, a, config["L"], d, config["replicates"],
                                                    config["seed"], side=config["side"], **_common(config))
            e = r.estimate
            rows.append((lam, a, r.L, e.value, e.ci_low, e.ci_high, e.replicates,
                         r.agreement_parameter, r.agreement_probability))
        writer.csv(
            "empty_block.csv",
            ("lambda", "a", "L", "estimate", "ci_low", "ci_high", "replicates",
             "agreement_parameter", "agreement_probability"),
            rows,
        )


HANDLERS = {
    "simulate": cmd_simulate,
    "survival": cmd_survival,
    "phase": cmd_phase,
    "lambda-c": cmd_lambda_c,
    "meanfield": cmd_meanfield,
    "couple": cmd_couple,
    "hardcore": cmd_hardcore,
    "blocks": cmd_blocks,
}


def main(argv=None):
    """Entry point; returns the exit code."""
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    values = vars(parser.parse_args(_attach_values(argv, parser)))
    command = values.pop("command")
    config_path = values.pop("config", None)
    try:
        file_data = load_file(config_path) if config_path else {}
        config = resolve(command, file_data, values)
    except ConfigError as exc:
        print("densitycp: {}".format(exc.qualified()), file=sys.stderr)
        return EXIT_CONFIG

    configure_logging(config["log_level"])
    print("seed: {}".format(config["seed"]))
    writer = ArtifactWriter(os.path.join(config["output_dir"], command), config)
    try:
        HANDLERS[command](config, writer)
    except ConfigError as exc:
        print("densitycp: {}".format(exc.qualified()), file=sys.stderr)
        return EXIT_CONFIG
    except DensityCPError as exc:
        print("densitycp: {}".format(exc.qualified()), file=sys.stderr)
        return EXIT_RUNTIME
    writer.manifest()
    return EXIT_OK
