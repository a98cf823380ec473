"""
Command line entry point.

    python -m kerrcavity run --preset fig3b --format csv --out fig3b.csv
    python -m kerrcavity run --config run.json --engine both
    python -m kerrcavity run --preset fig2a --validate --seed 42
    python -m kerrcavity presets

Exit status: 0 success, 2 invalid request, 3 numerical failure.
"""
import argparse
import dataclasses
import logging
import sys
from typing import List, Optional

from kerrcavity import config as run_config
from kerrcavity.config import PointRequest, RunConfig, TruncationSettings
from kerrcavity.errors import NumericalError, ParameterError
from kerrcavity.report import Table, write_table, write_validation_report
from kerrcavity.sweep import ENGINES, PRESET_IDS, evaluate_point, preset, run_sweep
from kerrcavity.validation import run_validation

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARAMETER = 2
EXIT_NUMERICAL = 3

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def configure_logging(verbosity: int = 0) -> None:
    level = logging.DEBUG if verbosity > 0 else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kerrcavity", description=__doc__.split("\n")[1])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="evaluate a sweep or a single point")
    source = run.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", help="JSON run config")
    source.add_argument("--preset", help=f"figure panel preset, one of {', '.join(PRESET_IDS)}")
    run.add_argument("--format", choices=run_config.FORMATS, help="output format (default csv)")
    run.add_argument("--out", help=f"output path (overrides ${run_config.OUTPUT_ENV})")
    run.add_argument("--validate", action="store_true", help="run the invariant suite instead")
    run.add_argument("--seed", type=int, help="seed for the random validation draws")
    run.add_argument("--engine", choices=ENGINES, help="override the configured engine")
    run.add_argument("--points", type=int, help="override the number of sweep points")
    run.add_argument("-v", "--verbose", action="count", default=0, dest="run_verbose")

    commands.add_parser("presets", help="list figure presets")
    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    if args.preset:
        spec = preset(args.preset)
        cfg = RunConfig(
            params=spec.params,
            truncation=TruncationSettings(tail_eps=spec.tail_eps),
            sweep=spec,
            name=args.preset,
        )
    else:
        cfg = run_config.load_config(args.config)

    if cfg.sweep is not None and (args.engine or args.points):
        overrides = {}
        if args.engine:
            overrides["engine"] = args.engine
        if args.points:
            overrides["points"] = args.points
        cfg = dataclasses.replace(cfg, sweep=dataclasses.replace(cfg.sweep, **overrides))
    if cfg.point is not None and args.engine:
        cfg = dataclasses.replace(cfg, point=dataclasses.replace(cfg.point, engine=args.engine))
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.format:
        cfg = dataclasses.replace(cfg, output=dataclasses.replace(cfg.output, format=args.format))
    return cfg


def _validate(cfg: RunConfig, args: argparse.Namespace) -> int:
    report = run_validation(cfg)
    path = run_config.output_path(args.out, None, f"{cfg.name}_validation", "json")
    write_validation_report(report, path)
    rwa = next((c for c in report["checks"] if c["name"] == "closed_vs_rwa"), None)
    failed = [c["name"] for c in report["checks"] if c["status"] == "fail"]
    summary = f"{cfg.name}: {len(report['checks'])} checks, "
    summary += "all passed" if report["passed"] else f"FAILED {', '.join(failed)}"
    if rwa is not None:
        summary += f", max closed-vs-oracle delta {rwa['value']:.3e}"
    print(f"{summary}, report {path}")
    return EXIT_OK if report["passed"] else EXIT_NUMERICAL


def _evaluate(cfg: RunConfig, args: argparse.Namespace) -> int:
    fmt = cfg.output.format
    path = run_config.output_path(args.out, cfg.output.path, cfg.name, fmt)
    if cfg.sweep is not None:
        result = run_sweep(cfg.sweep)
        table = Table.from_sweep(result)
        failures = result.failures
        max_delta = result.max_delta()
    else:
        request: PointRequest = cfg.point
        trunc = cfg.truncation.resolve(cfg.params)
        row = evaluate_point(cfg.params, trunc, request.t, request.observables, request.engine, cfg.integrator)
        table = Table.from_point(row, request.observables, request.engine)
        failures = 0
        max_delta = max([*row.delta.values(), *([row.amp_delta] if row.amp_delta is not None else [])], default=None)

    write_table(table, fmt, path)
    summary = f"{cfg.name}: {len(table.rows)} points ({failures} failed), engine={table.engine}"
    if table.engine == "both" and max_delta is not None:
        summary += f", max oracle delta {max_delta:.3e}"
    print(f"{summary}, wrote {path}")
    return EXIT_OK


def run(args: argparse.Namespace) -> int:
    try:
        cfg = _resolve_config(args)
        return _validate(cfg, args) if args.validate else _evaluate(cfg, args)
    except ParameterError as err:
        logger.error(f"invalid request: {err}")
        return EXIT_PARAMETER
    except NumericalError as err:
        logger.error(f"numerical failure: {type(err).__name__}: {err}")
        return EXIT_NUMERICAL


def list_presets() -> int:
    for preset_id in PRESET_IDS:
        spec = preset(preset_id)
        print(f"{preset_id}\t{spec.variable} in [{spec.start:g}, {spec.stop:g}]\t{', '.join(spec.observables)}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose + getattr(args, "run_verbose", 0))
    if args.command == "presets":
        return list_presets()
    return run(args)
