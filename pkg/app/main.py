#!/usr/bin/env python3
"""
branchcover command-line interface
Main application entry point
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

# Load .env file if it exists (for development)
from dotenv import load_dotenv

load_dotenv(Path(__file__).parent.parent / ".env")

import colorlog  # noqa: E402

from config_loader import ConfigLoader  # noqa: E402
from diagnostics import DiagnosticsCollector  # noqa: E402
from errors import ParseError  # noqa: E402
from map_zoo import resolve_map, zoo  # noqa: E402
from scenario_runner import dump_json, resolve_options, run_scenario, run_tasks, write_outputs  # noqa: E402
from scenario_validator import ScenarioValidator  # noqa: E402

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_TASK_FAILED = 1
EXIT_USAGE = 2

LEVELS = {
    "trace": logging.DEBUG,
    "debug": logging.DEBUG,
    "info": logging.INFO,
    "warning": logging.WARNING,
    "error": logging.ERROR,
    "fatal": logging.CRITICAL,
}

# Subcommand name -> scenario task type
COMMAND_TASKS = {
    "normal": "normal",
    "lift": "lift",
    "raylifts": "raylifts",
    "degree": "degree",
    "branch": "branch",
    "factor": "factor",
    "conserve": "conservation",
    "regularity": "regularity",
}


# Flags whose values are coordinate lists and may start with '-'
COORDINATE_FLAGS = ("--at", "--center", "--start", "--from", "--direction", "--dir", "--path", "--box")

# Global flags that override configuration options
OPTION_FLAGS = ("cell", "tol", "seed", "max_lifts", "fill_threshold", "boundary_factor")


def configure_logging(level: str) -> None:
    """Colored log lines on stderr; stdout stays free for command output"""
    handler = colorlog.StreamHandler(sys.stderr)
    handler.setFormatter(
        colorlog.ColoredFormatter(
            "%(log_color)s%(levelname)-8s%(reset)s %(name)s: %(message)s",
            log_colors={
                "DEBUG": "cyan",
                "INFO": "green",
                "WARNING": "yellow",
                "ERROR": "red",
                "CRITICAL": "bold_red",
            },
        )
    )
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(LEVELS.get(str(level).lower(), logging.INFO))


def _global_flags() -> argparse.ArgumentParser:
    flags = argparse.ArgumentParser(add_help=False)
    flags.add_argument("--cell", type=float, help="grid cell size")
    flags.add_argument("--tol", type=float, help="image-side tolerance")
    flags.add_argument("--out", help="output directory for report.json and SVGs")
    flags.add_argument("--svg", action="store_true", help="render one SVG per task")
    flags.add_argument("--seed", type=int, help="seed for all random probe sampling")
    flags.add_argument("--max-lifts", type=int, dest="max_lifts", help="cap on enumerated ray lifts")
    flags.add_argument(
        "--fill-threshold", type=float, dest="fill_threshold", help="required image fill of a normal domain"
    )
    flags.add_argument(
        "--boundary-factor", type=float, dest="boundary_factor", help="boundary Hausdorff threshold in cell*L units"
    )
    flags.add_argument("--log-level", dest="log_level", choices=sorted(LEVELS), help="log verbosity")
    return flags


def build_parser() -> argparse.ArgumentParser:
    flags = _global_flags()
    parser = argparse.ArgumentParser(
        prog="branchcover",
        description="Normal domains, path lifting, branch points and normal forms of planar maps",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help_text: str, needs_map: bool = True) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, parents=[flags], help=help_text)
        if needs_map:
            sub.add_argument("--map", required=True, help="zoo id or sampled:<path>")
        return sub

    def windowed(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--at", "--center", dest="at", required=True, help="center point x,y")
        sub.add_argument("--radius", type=float, help="starting radius r")
        sub.add_argument("--window", type=float, help="half-side of the grid window around the point")

    sub = command("normal", "build a verified normal domain U(x, f, r)")
    windowed(sub)
    sub.add_argument("--neighbourhood", action="store_true", help="require a normal neighbourhood")

    sub = command("lift", "lift a polyline through a normal domain")
    windowed(sub)
    sub.add_argument("--path", required=True, help="target polyline: file of 'x,y' lines or inline 'x,y;x,y;...'")
    sub.add_argument("--start", "--from", dest="start", required=True, help="start point x,y of the lift")

    sub = command("raylifts", "enumerate all lifts of a ray from f(x)")
    windowed(sub)
    sub.add_argument("--direction", "--dir", dest="direction", help="ray direction x,y (default 1,0)")

    sub = command("degree", "local degree by winding number")
    sub.add_argument("--at", required=True, help="point x,y")
    sub.add_argument("--rho", type=float, required=True, help="probe circle radius")
    sub.add_argument("--samples", type=int, help="initial loop samples")

    sub = command("branch", "detect isolated branch points in a box")
    sub.add_argument("--box", required=True, help="search rectangle x0,y0,x1,y1")

    sub = command("factor", "normal-form chart f = phi^-1 o z^k o psi")
    windowed(sub)
    sub.add_argument("--k", type=int, help="root order override")
    sub.add_argument("--probes", type=int, help="verification probes")

    sub = command("conserve", "degree conservation over a normal domain")
    windowed(sub)
    sub.add_argument("--probes", type=int, help="number of probe values")

    sub = command("regularity", "openness and lightness prechecks")
    sub.add_argument("--box", required=True, help="rectangle x0,y0,x1,y1")
    sub.add_argument("--resolution", type=float, help="probe resolution (defaults to --cell)")

    sub = command("run", "run a scenario file", needs_map=False)
    sub.add_argument("scenario", help="scenario JSON file")

    sub = commands.add_parser("zoo", help="built-in maps")
    sub.add_argument("action", choices=["list"])

    commands.add_parser("diagnostics", help="print version and platform information")
    return parser


def attach_coordinates(argv: List[str]) -> List[str]:
    """
    Rewrite `--box -2,-2,2,2` as `--box=-2,-2,2,2`

    argparse reads a value starting with '-' as an option unless it is a plain number.
    """
    out: List[str] = []
    i = 0
    while i < len(argv):
        if argv[i] in COORDINATE_FLAGS and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def _task_record(args: argparse.Namespace) -> Dict[str, Any]:
    """Scenario task record from subcommand arguments; absent options are left out"""
    task: Dict[str, Any] = {"type": COMMAND_TASKS[args.command]}
    for name in ("at", "start", "direction", "box", "radius", "window", "rho", "samples", "k", "probes", "resolution"):
        value = getattr(args, name, None)
        if value is not None:
            task[name] = value
    if getattr(args, "path", None):
        task["path"] = read_path_argument(args.path)
    if getattr(args, "neighbourhood", False):
        task["neighbourhood"] = True
    return task


def read_path_argument(value: str) -> List[str]:
    """
    Polyline vertices from a file (one 'x,y' or 'x y' per line, '#' comments)
    or from an inline 'x,y;x,y;...' string
    """
    source = Path(value)
    if source.is_file():
        lines = (line.split("#", 1)[0].strip() for line in source.read_text(encoding="utf-8").splitlines())
        return [line for line in lines if line]
    return [p for p in value.split(";") if p.strip()]


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """
    Option overrides from global flags; unset flags are left out

    Raises:
        ParseError: if a flag value is out of range
    """
    overrides: Dict[str, Any] = {}
    for name in OPTION_FLAGS:
        value = getattr(args, name, None)
        if value is None:
            continue
        flag = "--" + name.replace("_", "-")
        try:
            overrides[name] = ScenarioValidator.parse_field(ScenarioValidator.OPTION_KINDS[name], value)
        except ValueError as e:
            raise ParseError(f"{flag}: {e}", field=flag)
    return overrides


def run_command(args: argparse.Namespace, config: ConfigLoader) -> int:
    """Run one analysis subcommand as a single-task scenario"""
    task = _task_record(args)
    options = resolve_options(config, None, _overrides(args))
    planar_map = resolve_map(args.map)
    echo = {"command": args.command, "map": args.map, "tasks": [task]}
    report, outcomes = run_tasks(planar_map, [task], options, echo)

    output_dir = Path(args.out or options["output"])
    write_outputs(report, outcomes, output_dir, [0] if args.svg else [])
    chart = outcomes[0].artifacts.get("chart")
    if chart is not None:
        chart_path = output_dir / "chart.json"
        chart_path.write_text(dump_json(chart.to_dict(include_table=True)), encoding="utf-8")
        logger.info(f"Wrote {chart_path}")

    entry = report["tasks"][0]
    sys.stdout.write(dump_json(entry))
    return EXIT_OK if report["succeeded"] else EXIT_TASK_FAILED


def list_zoo() -> int:
    for entry in zoo():
        sys.stdout.write(f"{entry.identifier:<14} {entry.description}\n")
    return EXIT_OK


def print_diagnostics() -> int:
    collector = DiagnosticsCollector()
    sys.stdout.write(collector.generate_markdown_report(collector.collect_all()))
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(attach_coordinates(sys.argv[1:] if argv is None else argv))

    config = ConfigLoader()
    options = config.load_options()
    configure_logging(getattr(args, "log_level", None) or options["log_level"])

    if not config.validate_configuration():
        logger.error("Configuration validation failed")
        return EXIT_USAGE

    try:
        if args.command == "zoo":
            return list_zoo()
        if args.command == "diagnostics":
            return print_diagnostics()
        if args.command == "run":
            overrides = _overrides(args)
            overrides.update({"output": args.out, "render": args.svg})
            report = run_scenario(args.scenario, overrides, config)
            failed = [t["index"] for t in report["tasks"] if t["status"] != "ok"]
            if failed:
                logger.warning(f"Tasks with errors: {failed}")
            return EXIT_OK if report["succeeded"] else EXIT_TASK_FAILED
        return run_command(args, config)
    except ParseError as e:
        logger.error(f"{e.code}: {e.message}")
        sys.stdout.write(dump_json(e.to_dict()))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
