#!/usr/bin/env python3
"""Parameter sweeps: spec loading, grid evaluation and CSV/SVG output.

A sweep spec is a flat TOML file of ``key = value`` lines. Layers merge as
built-in defaults < recipe presets < spec file < command-line overrides. The CSV
output starts with ``# key = value`` metadata lines that echo the complete
configuration, so a result file can be re-read as a spec.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import tomllib
import warnings
from collections.abc import Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import UTC, datetime
from enum import Enum
from pathlib import Path
from typing import Any, Final

import numpy as np

from . import __version__
from .common import (
    THREADS_ENV,
    WEAK_ADIABATIC_THRESHOLD,
    ComputationError,
    ConfigError,
    FastProbeWarning,
    GridPointError,
    MetadataValue,
    Sign,
    SweepResult,
    SweepRow,
    convert_units,
    format_float,
)
from .fockspace import (
    Coherent,
    FieldState,
    Fock,
    SqueezedCoherent,
    SqueezedVacuum,
    SqueezeParams,
)
from .integrals import CavitySetup, SwitchingProfile, kernel_I
from .perturbation import (
    CoherentGap,
    FockGap,
    InterferometryConfig,
    RelPhaseGap,
    ResolutionQuery,
    SqueezeGap,
    interferometric_phase,
    phase,
    resolution,
    stability_curve,
    transition_probability,
    visibility,
)

logger = logging.getLogger(__name__)

ConfigValue = str | float | int | bool | list[float]


# ============================================================================
# Constants
# ============================================================================

# Every recognized spec key with its default; the default fixes the key's type
SPEC_KEYS: Final[dict[str, ConfigValue]] = {
    # what to compute
    "observable": "probability",
    "parameter": "magnitude",
    "grid_min": 0.0,
    "grid_max": 1.0,
    "points": 11,
    "scale": "linear",
    "endpoint": True,
    "family_parameter": "",
    "family_values": [],
    # cavity and probe
    "length": 1.0,
    "beta": 2,
    "omega": 0.0,
    "speed_m_per_s": 1000.0,
    "coupling": 1e-4,
    "resonant": True,
    "epsilon": 0.0,
    # target arm
    "state": "coherent",
    "n": 0,
    "magnitude": 1.0,
    "r": 0.0,
    "psi": 0.0,
    "phi": 0.0,
    # reference arm (coherent)
    "reference_magnitude": 1.0,
    # resolution queries
    "gap": "fock",
    "m": 1,
    "delta": 0.1,
    # numerics and output
    "rel_tol": 1e-6,
    "phase_rel_tol": 1e-5,
    "output": "sweep.csv",
    "svg": True,
    "title": "",
}

STATE_KINDS: Final = ("fock", "coherent", "squeezed_vacuum", "squeezed_coherent")
GAP_KINDS: Final = ("fock", "magnitude", "squeeze", "psi")
INTEGER_KEYS: Final = frozenset({"beta", "n", "m", "points"})
SWEEPABLE_KEYS: Final = frozenset(
    {
        "length",
        "omega",
        "speed_m_per_s",
        "coupling",
        "epsilon",
        "n",
        "m",
        "magnitude",
        "r",
        "psi",
        "phi",
        "reference_magnitude",
        "delta",
    }
)
PHASE_OBSERVABLES: Final = frozenset({"phase", "interferometric_phase", "resolution"})


class Observable(Enum):
    """Quantity evaluated at every grid point."""

    PROBABILITY = "probability"
    PHASE = "phase"
    INTERFEROMETRIC_PHASE = "interferometric_phase"
    RESOLUTION = "resolution"
    VISIBILITY = "visibility"
    STABILITY = "stability"


# ============================================================================
# Config Layers
# ============================================================================


def _coerce(key: str, value: Any) -> ConfigValue:
    """Check a raw TOML value against the type of the key's default."""
    if key not in SPEC_KEYS:
        raise ConfigError(f"unknown spec key: {key!r}")
    default = SPEC_KEYS[key]
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int | float):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        if not float(value).is_integer():
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, int | float):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list) or not all(
            isinstance(v, int | float) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"{key} must be a list of numbers, got {value!r}")
        return [float(v) for v in value]
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be a string, got {value!r}")
    return value


def parse_layer(raw: Mapping[str, Any]) -> dict[str, ConfigValue]:
    """Validate one config layer key by key."""
    return {key: _coerce(key, value) for key, value in raw.items()}


def load_spec_file(path: Path) -> dict[str, ConfigValue]:
    """Read a flat TOML spec file.

    Raises:
        ConfigError: If the file is missing, not valid TOML, nested, or has unknown keys
    """
    if not path.exists():
        raise ConfigError(f"spec file not found: {path}")
    try:
        with path.open("rb") as f:
            raw = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    nested = [key for key, value in raw.items() if isinstance(value, dict)]
    if nested:
        raise ConfigError(f"{path}: spec files are flat, found tables {nested}")
    return parse_layer(raw)


def parse_override(text: str) -> dict[str, ConfigValue]:
    """Parse one ``key=value`` command-line override, value in TOML syntax.

    Bare words that are not TOML literals are taken as strings.

    Examples:
        >>> parse_override("points=5")
        {'points': 5}
        >>> parse_override("state=fock")
        {'state': 'fock'}
    """
    key, sep, value = text.partition("=")
    key, value = key.strip(), value.strip()
    if not sep or not key:
        raise ConfigError(f"override must look like key=value: {text!r}")
    try:
        raw = tomllib.loads(f"{key} = {value}")
    except tomllib.TOMLDecodeError:
        raw = {key: value}
    return parse_layer(raw)


def merge_config(*layers: Mapping[str, ConfigValue]) -> dict[str, ConfigValue]:
    """Defaults first, then each layer in order; later layers win."""
    merged: dict[str, ConfigValue] = dict(SPEC_KEYS)
    for layer in layers:
        merged.update(layer)
    return merged


def toml_value(value: ConfigValue | MetadataValue) -> str:
    """Render a scalar or list as a TOML literal with 17 significant digits."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        text = format_float(value)
        return text if any(c in text for c in ".en") else f"{text}.0"
    if isinstance(value, list):
        return "[" + ", ".join(toml_value(v) for v in value) + "]"
    escaped = value.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


# ============================================================================
# Sweep Spec
# ============================================================================


@dataclass(frozen=True)
class GridSpec:
    """Swept parameter and its grid."""

    name: str
    minimum: float
    maximum: float
    points: int
    scale: str = "linear"
    endpoint: bool = True

    def __post_init__(self) -> None:
        if self.name not in SWEEPABLE_KEYS:
            raise ConfigError(f"parameter {self.name!r} cannot be swept")
        if self.points < 2:
            raise ConfigError(f"a grid needs at least 2 points: {self.points}")
        if self.scale not in ("linear", "log"):
            raise ConfigError(f"scale must be linear or log: {self.scale!r}")
        if self.scale == "log" and (self.minimum <= 0.0 or self.maximum <= 0.0):
            raise ConfigError("log grids need positive bounds")

    def values(self) -> list[float]:
        if self.scale == "log":
            grid = np.geomspace(self.minimum, self.maximum, self.points, self.endpoint)
        else:
            grid = np.linspace(self.minimum, self.maximum, self.points, self.endpoint)
        values = [float(x) for x in grid]
        if self.name in INTEGER_KEYS and not all(x.is_integer() for x in values):
            raise ConfigError(f"grid for integer parameter {self.name} is not integral")
        return values


@dataclass(frozen=True)
class SweepSpec:
    """Validated sweep: observable, grid, fixed values and output."""

    observable: Observable
    grid: GridSpec
    fixed: dict[str, ConfigValue] = field(default_factory=dict)
    family_parameter: str | None = None
    family_values: tuple[float, ...] = ()
    output: Path | None = None
    svg: bool = False

    @classmethod
    def from_config(cls, config: Mapping[str, ConfigValue]) -> SweepSpec:
        """Build from a merged config (see merge_config).

        Raises:
            ConfigError: If any value is out of range or inconsistent
        """
        values = merge_config(parse_layer(config))
        try:
            observable = Observable(values["observable"])
        except ValueError:
            raise ConfigError(f"unknown observable: {values['observable']!r}") from None
        grid = GridSpec(
            name=str(values["parameter"]),
            minimum=float(values["grid_min"]),  # type: ignore[arg-type]
            maximum=float(values["grid_max"]),  # type: ignore[arg-type]
            points=int(values["points"]),  # type: ignore[call-overload]
            scale=str(values["scale"]),
            endpoint=bool(values["endpoint"]),
        )
        family = str(values["family_parameter"]) or None
        family_values = tuple(values["family_values"])  # type: ignore[arg-type]
        if family is not None:
            if family not in SWEEPABLE_KEYS or family == grid.name:
                raise ConfigError(f"family parameter {family!r} is not usable")
            if not family_values:
                raise ConfigError("family_parameter needs family_values")
        if observable is Observable.STABILITY and grid.name != "epsilon":
            raise ConfigError("stability sweeps run over epsilon")
        if values["state"] not in STATE_KINDS:
            raise ConfigError(
                f"state must be one of {STATE_KINDS}: {values['state']!r}"
            )
        if values["gap"] not in GAP_KINDS:
            raise ConfigError(f"gap must be one of {GAP_KINDS}: {values['gap']!r}")
        output = str(values["output"])
        spec = cls(
            observable=observable,
            grid=grid,
            fixed=values,
            family_parameter=family,
            family_values=family_values,
            output=Path(output) if output else None,
            svg=bool(values["svg"]),
        )
        # Building one point catches range errors before any work starts
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", FastProbeWarning)
            first_family = family_values[0] if family else None
            point = spec.point_values(grid.values()[0], first_family)
            build_setup(point)
            build_target(point)
        return spec

    def point_values(
        self, x: float, family: float | None = None
    ) -> dict[str, ConfigValue]:
        """Config values at one grid point."""
        values = dict(self.fixed)
        values[self.grid.name] = _typed(self.grid.name, x)
        if self.family_parameter is not None and family is not None:
            values[self.family_parameter] = _typed(self.family_parameter, family)
        return values

    def to_config(self) -> dict[str, ConfigValue]:
        """Full configuration echo."""
        return dict(self.fixed)


def _typed(key: str, value: float) -> ConfigValue:
    if key in INTEGER_KEYS:
        if not float(value).is_integer():
            raise ConfigError(f"{key} takes integer values, got {value}")
        return int(value)
    return float(value)


# ============================================================================
# Domain Objects From Config
# ============================================================================


def build_setup(values: Mapping[str, ConfigValue]) -> CavitySetup:
    return CavitySetup(
        length=float(values["length"]),  # type: ignore[arg-type]
        beta=int(values["beta"]),  # type: ignore[call-overload]
        omega=float(values["omega"]),  # type: ignore[arg-type]
        speed=convert_units(float(values["speed_m_per_s"])),  # type: ignore[arg-type]
        coupling=float(values["coupling"]),  # type: ignore[arg-type]
        resonant=bool(values["resonant"]),
    )


def build_target(values: Mapping[str, ConfigValue]) -> FieldState:
    kind = values["state"]
    magnitude = float(values["magnitude"])  # type: ignore[arg-type]
    r = float(values["r"])  # type: ignore[arg-type]
    psi = float(values["psi"])  # type: ignore[arg-type]
    phi = float(values["phi"])  # type: ignore[arg-type]
    if kind == "fock":
        return Fock(int(values["n"]))  # type: ignore[call-overload]
    if kind == "coherent":
        return Coherent.polar(magnitude, 0.5 * (psi + phi))
    if kind == "squeezed_vacuum":
        return SqueezedVacuum(SqueezeParams(r, phi))
    if kind == "squeezed_coherent":
        return SqueezedCoherent.from_relative_phase(r, magnitude, psi, phi)
    raise ConfigError(f"unknown state kind: {kind!r}")


def build_reference(values: Mapping[str, ConfigValue]) -> FieldState:
    magnitude = float(values["reference_magnitude"])  # type: ignore[arg-type]
    return Coherent.polar(magnitude)


def build_query(values: Mapping[str, ConfigValue]) -> ResolutionQuery:
    gap = values["gap"]
    magnitude = float(values["magnitude"])  # type: ignore[arg-type]
    r = float(values["r"])  # type: ignore[arg-type]
    psi = float(values["psi"])  # type: ignore[arg-type]
    delta = float(values["delta"])  # type: ignore[arg-type]
    if gap == "fock":
        n, m = int(values["n"]), int(values["m"])  # type: ignore[call-overload]
        return FockGap(n, m)
    if gap == "magnitude":
        return CoherentGap(magnitude, delta, r, psi)
    if gap == "squeeze":
        return SqueezeGap(r, delta, magnitude, psi)
    if gap == "psi":
        return RelPhaseGap(psi, delta, r, magnitude)
    raise ConfigError(f"unknown gap kind: {gap!r}")


# ============================================================================
# Grid Evaluation
# ============================================================================


def worker_count() -> int:
    """Worker threads from MODE_INVISIBILITY_THREADS, default os.cpu_count()."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or not raw.strip():
        return max(os.cpu_count() or 1, 1)
    try:
        count = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer: {raw!r}") from None
    return max(count, 1)


def evaluate_point(
    observable: Observable, values: Mapping[str, ConfigValue]
) -> SweepRow:
    """Evaluate one observable at one set of config values (index 0, no family)."""
    setup = build_setup(values)
    target = build_target(values)
    rel_tol = float(values["rel_tol"])  # type: ignore[arg-type]
    phase_tol = float(values["phase_rel_tol"])  # type: ignore[arg-type]
    x = 0.0
    method = kernel_I(setup, Sign.MINUS, setup.beta).method.value

    if observable is Observable.STABILITY:
        profile = SwitchingProfile(float(values["epsilon"]))  # type: ignore[arg-type]
        p = transition_probability(target, setup, rel_tol, profile=profile).p_excite
        if profile.epsilon:
            method = "quadrature"
        return SweepRow(0, x, p, p_target=p, method=method)

    p_target = transition_probability(target, setup, rel_tol).p_excite
    if observable is Observable.PROBABILITY:
        return SweepRow(0, x, p_target, p_target=p_target, method=method)
    if observable is Observable.PHASE:
        gamma = phase(target, setup, phase_tol).gamma
        return SweepRow(0, x, gamma, p_target=p_target, method=method)

    reference = build_reference(values)
    config = InterferometryConfig(target, reference, setup)
    p_reference = transition_probability(reference, setup, rel_tol).p_excite
    contrast = visibility(config, rel_tol)
    if observable is Observable.VISIBILITY:
        value = contrast
    elif observable is Observable.INTERFEROMETRIC_PHASE:
        value = interferometric_phase(config, phase_tol)
    else:
        value = resolution(build_query(values), config, phase_tol)
    return SweepRow(
        0,
        x,
        value,
        p_target=p_target,
        p_reference=p_reference,
        visibility=contrast,
        method=method,
    )


def _evaluate(
    spec: SweepSpec, index: int, x: float, family: float | None
) -> SweepRow:
    try:
        row = evaluate_point(spec.observable, spec.point_values(x, family))
    except ComputationError as e:
        raise GridPointError(index, x, e) from e
    row.index, row.parameter, row.family = index, x, family
    logger.debug("point %d (%s=%r): %r", index, spec.grid.name, x, row.value)
    return row


# (row index, grid value, family value)
GridPoint = tuple[int, float, float | None]


def _points(spec: SweepSpec) -> list[GridPoint]:
    families: Iterable[float | None] = (
        spec.family_values if spec.family_parameter is not None else (None,)
    )
    points = []
    for family in families:
        for x in spec.grid.values():
            points.append((len(points), x, family))
    return points


def _split_by_setup(
    spec: SweepSpec, points: list[GridPoint]
) -> tuple[list[GridPoint], list[GridPoint]]:
    """First point of every distinct cavity setup, then all other points.

    The first group fills the vacuum mode-sum cache for its setup before the
    remaining points fan out over the pool.
    """
    seen: set[CavitySetup] = set()
    leaders: list[GridPoint] = []
    rest: list[GridPoint] = []
    for point in points:
        setup = build_setup(spec.point_values(point[1], point[2]))
        (rest if setup in seen else leaders).append(point)
        seen.add(setup)
    return leaders, rest


def run_sweep(spec: SweepSpec, threads: int | None = None) -> SweepResult:
    """Evaluate the observable on the grid, in parallel, and write the outputs.

    Rows come back in grid order (families outermost) whatever the thread count.

    Raises:
        GridPointError: If a computation fails, annotated with the grid point
    """
    workers = threads if threads is not None else worker_count()
    points = _points(spec)
    logger.debug(
        "sweep of %s over %d points on %d threads",
        spec.observable.value,
        len(points),
        workers,
    )

    result = SweepResult(
        parameter=spec.grid.name,
        observable=spec.observable.value,
        family_parameter=spec.family_parameter,
    )
    # Filters are process-wide; set them once here, not in the worker threads
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FastProbeWarning)
        if spec.observable is Observable.STABILITY:
            _stability_rows(spec, result)
        else:
            leaders, rest = _split_by_setup(spec, points)
            with ThreadPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(lambda p: _evaluate(spec, *p), leaders))
                rows += pool.map(lambda p: _evaluate(spec, *p), rest)
            result.rows = sorted(rows, key=lambda row: row.index)

    _finish(spec, result)
    if spec.output is not None:
        write_csv(result, spec.output, spec.to_config())
        if spec.svg:
            svg_path = spec.output.with_suffix(".svg")
            write_svg(result, svg_path, str(spec.fixed["title"]))
    return result


def _stability_rows(spec: SweepSpec, result: SweepResult) -> None:
    """Stability curves go through stability_curve, one call per family."""
    families = spec.family_values if spec.family_parameter is not None else (None,)
    epsilons = spec.grid.values()
    for family in families:
        values = spec.point_values(0.0, family)
        try:
            curve = stability_curve(
                build_setup(values),
                build_target(values),
                epsilons,
                float(values["rel_tol"]),  # type: ignore[arg-type]
            )
        except ComputationError as e:
            raise GridPointError(len(result.rows), epsilons[0], e) from e
        for row in curve.rows:
            row.index = len(result.rows)
            row.family = family
            result.rows.append(row)
        suffix = "" if family is None else f"_{format_float(family)}"
        for key, value in curve.metadata.items():
            result.metadata[f"{key}{suffix}"] = value


def _finish(spec: SweepSpec, result: SweepResult) -> None:
    """Unwrapped phase columns and summary metadata."""
    families = spec.family_values if spec.family_parameter is not None else (None,)
    if spec.observable.value in PHASE_OBSERVABLES:
        for family in families:
            curve = [row for row in result.rows if row.family == family]
            unwrapped = np.unwrap([row.value for row in curve])
            for row, value in zip(curve, unwrapped):
                row.unwrapped = float(value)

    probabilities = [
        p
        for row in result.rows
        for p in (row.p_target, row.p_reference)
        if p is not None
    ]
    result.metadata["weak_adiabatic"] = all(
        p < WEAK_ADIABATIC_THRESHOLD for p in probabilities
    )
    result.metadata["rows"] = len(result.rows)


# ============================================================================
# Output
# ============================================================================


def metadata_lines(result: SweepResult, config: Mapping[str, ConfigValue]) -> list[str]:
    """``# key = value`` header: tool, timestamp, config echo, result metadata."""
    lines = [
        f"# tool = {toml_value('mode-invisibility')}",
        f"# version = {toml_value(__version__)}",
        f"# generated = {toml_value(datetime.now(UTC).isoformat(timespec='seconds'))}",
    ]
    lines += [f"# {key} = {toml_value(value)}" for key, value in config.items()]
    lines += [
        f"# result.{key} = {toml_value(value)}"
        for key, value in result.metadata.items()
    ]
    return lines


def write_csv(
    result: SweepResult, path: Path, config: Mapping[str, ConfigValue] | None = None
) -> None:
    """Write metadata lines, the header row and one row per grid point."""
    echo = dict(config) if config is not None else {}
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        for line in metadata_lines(result, echo):
            f.write(line + "\n")
        writer = csv.DictWriter(f, fieldnames=result.columns)
        writer.writeheader()
        columns = result.columns
        for row in result.rows:
            writer.writerow(row.to_dict(columns))
    logger.debug("wrote %d rows to %s", len(result.rows), path)


def read_csv(path: Path) -> tuple[dict[str, Any], list[dict[str, str]]]:
    """Read back a sweep CSV as (metadata, rows)."""
    metadata: dict[str, Any] = {}
    body: list[str] = []
    with path.open(newline="", encoding="utf-8") as f:
        for line in f:
            if line.startswith("# "):
                try:
                    parsed = tomllib.loads(line[2:])
                except tomllib.TOMLDecodeError as e:
                    raise ConfigError(f"{path}: bad metadata line {line!r}") from e
                metadata.update(_flatten(parsed))
            else:
                body.append(line)
    rows = list(csv.DictReader(body))
    return metadata, rows


def _flatten(parsed: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for key, value in parsed.items():
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{prefix}{key}."))
        else:
            flat[f"{prefix}{key}"] = value
    return flat


def spec_from_metadata(metadata: Mapping[str, Any]) -> dict[str, ConfigValue]:
    """Config echo of a sweep CSV as a spec layer."""
    echo = {key: value for key, value in metadata.items() if key in SPEC_KEYS}
    return parse_layer(echo)


def write_svg(result: SweepResult, path: Path, title: str = "") -> None:
    """Line plot of every curve; reproducible SVG (fixed hash salt, no date)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    families = sorted({row.family for row in result.rows}, key=lambda f: (f is None, f))
    with matplotlib.rc_context({"svg.hashsalt": "mode-invisibility"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for family in families:
            ys = [
                row.unwrapped if row.unwrapped is not None else row.value
                for row in result.rows
                if row.family == family
            ]
            label = (
                None if family is None else f"{result.family_parameter} = {family:g}"
            )
            ax.plot(result.parameters(family), ys, label=label)
        ax.set_xlabel(result.parameter)
        ax.set_ylabel(result.observable)
        if title:
            ax.set_title(title)
        if any(family is not None for family in families):
            ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
