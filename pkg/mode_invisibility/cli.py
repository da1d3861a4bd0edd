#!/usr/bin/env python3
"""Command-line front end: sweeps, recipes, validation and unit conversion.

Exit codes: 0 on success, 1 when a computation or validation check fails,
2 for invalid input (bad spec file, unknown key, out-of-range parameter).
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from collections.abc import Callable
from pathlib import Path

from . import __version__
from .common import (
    THREADS_ENV,
    ComputationError,
    ConfigError,
    convert_units,
    format_float,
)
from .recipes import get_recipe, recipe_names
from .sweep import (
    ConfigValue,
    SweepSpec,
    load_spec_file,
    merge_config,
    parse_override,
    run_sweep,
)
from .validation import preset_names, validate

EXIT_OK = 0
EXIT_COMPUTATION = 1
EXIT_CONFIG = 2


def create_parser() -> argparse.ArgumentParser:
    """Create argument parser."""
    parser = argparse.ArgumentParser(
        prog="mode-invisibility",
        description="Phases and excitation probabilities of an atom crossing a cavity",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"""
Examples:
  # Run a sweep described by a flat TOML file
  %(prog)s sweep spec.toml

  # Override spec keys on the command line (TOML values)
  %(prog)s sweep spec.toml --set points=21 --set state=fock

  # Regenerate a built-in curve into a directory
  %(prog)s recipe coherent-phase --out curves/
  %(prog)s recipe fig3 --out curves/

  # Check the perturbative formulas against exact propagation
  %(prog)s validate quick --report quick.json

  # Convert a probe speed to units of c
  %(prog)s units 1000

Environment:
  {THREADS_ENV}  worker threads for sweeps (default: CPU count)
""",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="store_true",
        help="print per-point status and enable debug logging",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    sweep = subparsers.add_parser(
        "sweep", help="run a parameter sweep from a spec file"
    )
    sweep.add_argument("spec_file", type=Path, help="flat TOML sweep spec")
    _add_sweep_options(sweep)

    recipe = subparsers.add_parser("recipe", help="run a built-in sweep recipe")
    recipe.add_argument("name", choices=recipe_names(), help="recipe name")
    recipe.add_argument(
        "--out",
        type=Path,
        metavar="DIR",
        default=Path("."),
        help="output directory (default: current directory)",
    )
    _add_sweep_options(recipe)

    check = subparsers.add_parser("validate", help="run a validation preset")
    check.add_argument("preset", choices=preset_names(), help="preset name")
    check.add_argument(
        "--report",
        type=Path,
        metavar="FILE",
        help="write the JSON report to FILE instead of stdout",
    )

    units = subparsers.add_parser("units", help="convert a speed in m/s to units of c")
    units.add_argument("speed", type=float, help="probe speed in m/s")
    return parser


def _add_sweep_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a spec key (repeatable)",
    )
    parser.add_argument(
        "-o",
        "--output",
        type=Path,
        metavar="FILE",
        help="CSV output path (overrides the spec's output key)",
    )
    parser.add_argument("--no-svg", action="store_true", help="skip the SVG plot")
    parser.add_argument(
        "--threads",
        type=int,
        metavar="N",
        help=f"worker threads (overrides {THREADS_ENV})",
    )


# ============================================================================
# Commands
# ============================================================================


def _overrides(args: argparse.Namespace) -> dict[str, ConfigValue]:
    layer: dict[str, ConfigValue] = {}
    for text in args.overrides:
        layer.update(parse_override(text))
    if args.output is not None:
        layer["output"] = str(args.output)
    if args.no_svg:
        layer["svg"] = False
    return layer


def _run(config: dict[str, ConfigValue], args: argparse.Namespace) -> int:
    spec = SweepSpec.from_config(config)
    if args.threads is not None and args.threads < 1:
        raise ConfigError(f"--threads must be >= 1: {args.threads}")
    if args.verbose:
        print(
            f"Sweeping {spec.observable.value} over {spec.grid.name} "
            f"({spec.grid.points} points, {spec.grid.scale})"
        )
    result = run_sweep(spec, args.threads)
    if args.verbose:
        for row in result.rows:
            family = "" if row.family is None else f" [{format_float(row.family)}]"
            print(
                f"  Point {row.index}{family}: {spec.grid.name}="
                f"{format_float(row.parameter)} -> {row.value:.6e}"
            )

    if spec.output is not None:
        print(f"✓ Wrote {len(result.rows)} rows to {spec.output}")
        if spec.svg:
            print(f"✓ Plot saved to {spec.output.with_suffix('.svg')}")
    for key, value in result.metadata.items():
        if key.startswith("slope"):
            print(f"  {key} = {value}")
    if not result.metadata.get("weak_adiabatic", True):
        print("⚠ Warning: some rows break the weak-adiabatic condition (P_e >= 1e-6)")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    print(f"Loading {args.spec_file}...")
    config = merge_config(load_spec_file(args.spec_file), _overrides(args))
    return _run(config, args)


def cmd_recipe(args: argparse.Namespace) -> int:
    recipe = get_recipe(args.name)
    print(f"Recipe {recipe.name}: {recipe.description}")
    layer = recipe.layer()
    layer["output"] = str(args.out / f"{recipe.name}.csv")
    config = merge_config(layer, _overrides(args))
    return _run(config, args)


def cmd_validate(args: argparse.Namespace) -> int:
    report = validate(args.preset)
    for check in report.checks:
        mark = "✓" if check.passed else "✗"
        line = f"{mark} {check.name}: {check.value:.3e} (bound {check.bound:.3e})"
        if check.detail:
            line += f" - {check.detail}"
        if args.verbose:
            line += f" ({check.elapsed:.2f} s)"
        print(line, file=sys.stderr)
    if args.report is not None:
        args.report.write_text(report.to_json() + "\n", encoding="utf-8")
        print(f"✓ Report written to {args.report}", file=sys.stderr)
    else:
        print(report.to_json())
    if report.passed:
        return EXIT_OK
    failed = sum(not check.passed for check in report.checks)
    print(f"✗ Error: {failed} check(s) failed", file=sys.stderr)
    return EXIT_COMPUTATION


def cmd_units(args: argparse.Namespace) -> int:
    print(format_float(convert_units(args.speed)))
    return EXIT_OK


COMMANDS: dict[str, Callable[[argparse.Namespace], int]] = {
    "sweep": cmd_sweep,
    "recipe": cmd_recipe,
    "validate": cmd_validate,
    "units": cmd_units,
}


def main(argv: list[str] | None = None) -> int:
    """Main execution flow."""
    parser = create_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            code = COMMANDS[args.command](args)
        except ConfigError as e:
            print(f"✗ Error: {e}", file=sys.stderr)
            code = EXIT_CONFIG
        except ComputationError as e:
            print(f"✗ Error: {e}", file=sys.stderr)
            code = EXIT_COMPUTATION

    seen: set[str] = set()
    for warning in caught:
        message = f"{warning.category.__name__}: {warning.message}"
        if message not in seen:
            seen.add(message)
            print(f"⚠ Warning: {message}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
