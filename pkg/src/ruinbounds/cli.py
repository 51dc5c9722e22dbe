"""Command line front end: ``ruinbounds bound|verify|sweep|simulate``.

Exit status is 0 when no row is violated, 1 when at least one is, and 2 for
usage, configuration and cell errors.
"""

from pathlib import Path
from ruinbounds.config import apply_overrides
from ruinbounds.config import fingerprint
from ruinbounds.config import load_config
from ruinbounds.config import shipped_configs
from ruinbounds.config import SWEEP_PARAMETERS
from ruinbounds.config import with_parameter
from ruinbounds.experiments import bound_constant
from ruinbounds.experiments import config_ensemble
from ruinbounds.experiments import run_cell
from ruinbounds.interfaces import ERROR
from ruinbounds.interfaces import RuinBoundsError
from ruinbounds.interfaces import VIOLATED
from ruinbounds.processes import dump_ensemble
from ruinbounds.reports import getReportWriter
from ruinbounds.utils import default_jobs
from ruinbounds.utils import parallel_map

import argparse
import json
import logging
import math
import ruinbounds
import sys

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

EXIT_OK = 0
EXIT_VIOLATED = 1
EXIT_ERROR = 2

_components_loaded = False


def load_components():
    """Register the runners and writers from configure.zcml once."""
    global _components_loaded
    if _components_loaded:
        return
    from zope.configuration import xmlconfig

    xmlconfig.file("configure.zcml", package=ruinbounds)
    _components_loaded = True


def exit_status(rows):
    statuses = {row.status for row in rows}
    if VIOLATED in statuses:
        return EXIT_VIOLATED
    if ERROR in statuses:
        return EXIT_ERROR
    return EXIT_OK


def _configs(args):
    paths = list(args.configs or []) + list(args.config or [])
    if getattr(args, "defaults", False):
        paths.extend(shipped_configs())
    if not paths:
        raise RuinBoundsError("no configuration given")
    configs = []
    for path in paths:
        config = load_config(path)
        configs.append(
            apply_overrides(config, args.seed, args.paths, args.resolution)
        )
    return configs


def run_cells(cells, jobs):
    """Rows of (config, u, cell index) triples in input order.

    Cells share the worker pool; a single cell gets the workers instead.
    """
    if len(cells) == 1:
        config, u, index = cells[0]
        return [run_cell(config, u, index, jobs)]
    return parallel_map(lambda cell: run_cell(*cell), cells, jobs)


def _append(path, writer, rows):
    """Append rows to a report file, with a header when the file is new."""
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="", encoding="utf-8") as stream:
        if new:
            writer.write_header(stream)
        writer.write(stream, rows)
    logger.info("Appended %d rows to %s", len(rows), path)


def write_rows(rows, out, fmt, summary=True):
    """Records in ``fmt`` to ``out`` (``-`` is stdout), plus a CSV summary
    next to a JSON-lines file.
    """
    writer = getReportWriter(fmt)
    if out == "-":
        writer.write_header(sys.stdout)
        writer.write(sys.stdout, rows)
        return
    _append(out, writer, rows)
    if summary and fmt != "csv":
        _append(Path(out).with_suffix(".csv"), getReportWriter("csv"), rows)


def _write_per_config(configs, rows, fmt):
    """Honour the report and csv locations of each configuration."""
    by_fingerprint = {}
    for row in rows:
        by_fingerprint.setdefault(row.fingerprint, []).append(row)
    leftover = []
    for config in configs:
        own = by_fingerprint.pop(fingerprint(config), [])
        if config.report or config.csv:
            if config.report:
                _append(config.report, getReportWriter("jsonl"), own)
            if config.csv:
                _append(config.csv, getReportWriter("csv"), own)
        else:
            leftover.extend(own)
    if leftover:
        write_rows(leftover, "-", fmt)


def cmd_bound(args):
    for config in _configs(args):
        K, used = bound_constant(config)
        if args.format == "jsonl":
            record = {
                "name": config.name,
                "process": config.process,
                "fingerprint": fingerprint(config),
                "K": K.value if K.finite else None,
                "K_used": used,
                "log_K": K.log_value if math.isfinite(K.log_value) else None,
                "method": K.method,
                "argmin_t": K.argmin_t,
                "vacuous": K.vacuous,
                "components": {
                    name: value
                    for name, value in K.components.items()
                    if not isinstance(value, float) or math.isfinite(value)
                },
            }
            print(json.dumps(record, sort_keys=True))
            continue
        print(f"{config.name} ({config.process})")
        print(f"  K = {K.value:.10g} [{used}, {K.method}]")
        if K.vacuous:
            print(f"  vacuous: log K = {K.log_value:.6g}")
        if K.argmin_t is not None:
            print(f"  argmin t = {K.argmin_t:.6g}")
        for name in sorted(K.components):
            value = K.components[name]
            if isinstance(value, float):
                value = f"{value:.10g}"
            print(f"  {name} = {value}")
    return EXIT_OK


def cmd_verify(args):
    configs = _configs(args)
    cells = [
        (config, u, index)
        for config in configs
        for index, u in enumerate(config.u_values)
    ]
    logger.info("Running %d cells from %d configurations", len(cells), len(configs))
    rows = run_cells(cells, args.jobs)
    if args.out:
        write_rows(rows, args.out, args.format or "jsonl")
    else:
        _write_per_config(configs, rows, args.format or "jsonl")
    status = exit_status(rows)
    counts = {}
    for row in rows:
        counts[row.status] = counts.get(row.status, 0) + 1
    logger.info("Verification finished: %s", counts)
    return status


def _single(args):
    configs = _configs(args)
    if len(configs) != 1:
        raise RuinBoundsError(f"{args.command} takes one configuration")
    return configs[0]


def cmd_sweep(args):
    config = _single(args)
    configs = [
        with_parameter(config, args.parameter, value) for value in args.values
    ]
    cells = [
        (swept, u, index)
        for swept in configs
        for index, u in enumerate(swept.u_values)
    ]
    values = [
        value for value, swept in zip(args.values, configs) for _ in swept.u_values
    ]
    rows = run_cells(cells, args.jobs)
    for row, value in zip(rows, values):
        row.parameter = args.parameter
        row.value = float(value)
    fmt = args.format or "csv"
    writer = getReportWriter(fmt)
    if not args.out or args.out == "-":
        writer.write_header(sys.stdout)
        writer.write(sys.stdout, rows)
    else:
        _append(args.out, writer, rows)
    return exit_status(rows)


def cmd_simulate(args):
    config = _single(args)
    ensemble = config_ensemble(config, args.resolution)
    out = args.out or f"{config.name}.ens"
    dump_ensemble(ensemble, out)
    print(out)
    return EXIT_OK


def _common(parser):
    parser.add_argument("configs", nargs="*", help="experiment configuration files")
    parser.add_argument(
        "--config", action="append", help="experiment configuration file"
    )
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--paths", type=int, help="override the number of paths")
    parser.add_argument(
        "--resolution", type=int, help="run at this single grid resolution"
    )
    parser.add_argument(
        "--jobs",
        type=int,
        default=default_jobs(),
        help="worker threads (default: $RUINBOUNDS_JOBS or the core count)",
    )
    parser.add_argument("--out", help="output file, - for stdout")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("-q", "--quiet", action="store_true")


def make_parser():
    parser = argparse.ArgumentParser(
        prog="ruinbounds",
        description="Uniform bounds for simultaneous ruin probabilities",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    bound = commands.add_parser("bound", help="print the bound constant")
    _common(bound)
    bound.add_argument("--format", choices=("text", "jsonl"), default="text")
    bound.set_defaults(func=cmd_bound)

    verify = commands.add_parser("verify", help="check the sandwich over the u grid")
    _common(verify)
    verify.add_argument("--format", choices=("csv", "jsonl"))
    verify.add_argument(
        "--defaults",
        action="store_true",
        help="run the shipped verification matrix",
    )
    verify.set_defaults(func=cmd_verify)

    sweep = commands.add_parser("sweep", help="plot data over one parameter")
    _common(sweep)
    sweep.add_argument("--format", choices=("csv", "jsonl"))
    sweep.add_argument("--parameter", required=True, choices=SWEEP_PARAMETERS)
    sweep.add_argument("--values", type=float, nargs="*", default=[])
    sweep.set_defaults(func=cmd_sweep)

    simulate = commands.add_parser("simulate", help="dump a path ensemble")
    _common(simulate)
    simulate.set_defaults(func=cmd_simulate)
    return parser


def _log_level(args):
    if args.quiet:
        return logging.ERROR
    if args.verbose >= 2:
        return logging.DEBUG
    if args.verbose == 1:
        return logging.INFO
    return logging.WARNING


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=_log_level(args), format=LOG_FORMAT, stream=sys.stderr)
    load_components()
    try:
        return args.func(args)
    except (RuinBoundsError, ValueError, OSError) as e:
        print(f"ruinbounds {args.command}: {e}", file=sys.stderr)
        return EXIT_ERROR
