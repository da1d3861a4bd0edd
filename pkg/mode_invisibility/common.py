#!/usr/bin/env python3
"""Shared constants, exceptions and small helpers for the mode invisibility tools.

This module contains the numerical defaults, the exception and warning classes,
and the enums used across fockspace, integrals, perturbation, oracle, sweep and
the command-line front end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Final

# ============================================================================
# Constants
# ============================================================================

# Speed of light in m/s (exact, SI definition)
SPEED_OF_LIGHT: Final = 2.99792458e8

# Speeds above this fraction of c leave the v << 1 regime
FAST_PROBE_SPEED: Final = 0.01

# Fock-space truncation
NORM_TOLERANCE: Final = 1e-10
MIN_CUTOFF: Final = 30
CUTOFF_SCALE: Final = 10.0
EXTENSION_FACTOR: Final = 2  # states are built on this multiple of n_max, then cut

# Kernel evaluation
RESONANCE_THRESHOLD: Final = 1e-8
QUAD_EPSABS: Final = 1e-13
QUAD_EPSREL: Final = 1e-10
QUAD_LIMIT: Final = 2**16
PANEL_THRESHOLD: Final = 64  # oscillation periods before weighted quadrature kicks in

# Mode sums
TAIL_FIT_POINTS: Final = 32
FIRST_BATCH: Final = 512
MAX_MODE_TERMS: Final = 10**6
DEFAULT_REL_TOL: Final = 1e-6

# Perturbative observables
WEAK_ADIABATIC_THRESHOLD: Final = 1e-6
BRANCH_THRESHOLD: Final = 0.5
SMALL_PHASE_LIMIT: Final = 0.1
UNIT_DISK_SLACK: Final = 1e-9

# Exact propagation
HILBERT_BUDGET: Final = 2 * 10**5
NORM_DRIFT_LIMIT: Final = 1e-9
STEP_HALVING_TOLERANCE: Final = 1e-3
ORACLE_RTOL: Final = 1e-10
ORACLE_ATOL: Final = 1e-13
ORACLE_REFINEMENTS: Final = 4

# Output
CSV_DIGITS: Final = 17
THREADS_ENV: Final = "MODE_INVISIBILITY_THREADS"


# ============================================================================
# Exceptions
# ============================================================================


class ConfigError(Exception):
    """Invalid parameters, spec file or command-line input."""

    pass


class RangeError(ConfigError):
    """Physical quantity outside its admissible range."""

    pass


class ComputationError(Exception):
    """Numerical evaluation failed."""

    pass


class TruncationError(ComputationError):
    """Fock cutoff too small for the requested state."""

    pass


class QuadratureFailure(ComputationError):
    """Adaptive quadrature did not reach the requested tolerance."""

    pass


class NonConvergence(ComputationError):
    """Mode sum did not converge within the term budget."""

    pass


class WeakAdiabaticViolation(ComputationError):
    """Excitation probability too large for an interferometric reading."""

    pass


class StepFailure(ComputationError):
    """Time stepping could not meet the step-halving criterion."""

    pass


class NormDrift(ComputationError):
    """State norm drifted beyond the unitarity monitor limit."""

    pass


class GridPointError(ComputationError):
    """Computation failure at a specific sweep grid point."""

    def __init__(self, index: int, value: float, cause: Exception) -> None:
        self.index = index
        self.value = value
        self.cause = cause
        super().__init__(
            f"grid point {index} (value={format_float(value)}): "
            f"{type(cause).__name__}: {cause}"
        )


# ============================================================================
# Warnings
# ============================================================================


class BranchWarning(UserWarning):
    """Logarithm argument far from 1; perturbative phase is unreliable."""

    pass


class SmallPhaseWarning(UserWarning):
    """Linearized phase requested outside the small-phase regime."""

    pass


class FastProbeWarning(UserWarning):
    """Probe speed outside the v << 1 regime."""

    pass


# ============================================================================
# Enums
# ============================================================================


class Sign(Enum):
    """Sign of the atomic gap in a kernel exponent, (±Ω + ω_κ)."""

    PLUS = 1  # counter-rotating, e^{i(ω+Ω)t}
    MINUS = -1  # rotating-wave resonant, e^{i(ω-Ω)t}


class KernelMethod(Enum):
    """How a kernel value was obtained."""

    CLOSED_FORM = "closed_form"
    RESONANT_LIMIT = "resonant_limit"
    QUADRATURE = "quadrature"


class ModeSumKind(Enum):
    """Which vacuum mode sum to evaluate."""

    ABS_I_PLUS_SQ = "abs_i_plus_sq"  # Σ |I₊,γ|² / (k_γ L)
    C_PLUS_CONJ = "c_plus_conj"  # Σ C*₊,γ / (k_γ L)


# ============================================================================
# Dataclasses
# ============================================================================

MetadataValue = str | float | int | bool


@dataclass
class SweepRow:
    """One evaluated grid point of a sweep."""

    index: int
    parameter: float
    value: float
    family: float | None = None
    unwrapped: float | None = None
    p_target: float | None = None
    p_reference: float | None = None
    visibility: float | None = None
    method: str = ""

    def to_dict(self, columns: list[str]) -> dict[str, str]:
        """Convert to CSV row format.

        Args:
            columns: Header of the owning SweepResult

        Returns:
            Dict suitable for csv.DictWriter, floats with 17 significant digits
        """
        cells = [self.parameter, self.value, self.unwrapped, self.p_target,
                 self.p_reference, self.visibility]
        if self.family is not None:
            cells.insert(0, self.family)
        row = {
            name: "" if cell is None else format_float(cell)
            for name, cell in zip(columns, cells)
        }
        row[columns[-1]] = self.method
        return row


@dataclass
class SweepResult:
    """Rows of a sweep plus the metadata needed to re-run it."""

    parameter: str
    observable: str
    rows: list[SweepRow] = field(default_factory=list)
    metadata: dict[str, MetadataValue] = field(default_factory=dict)
    family_parameter: str | None = None

    @property
    def columns(self) -> list[str]:
        """CSV header, family column first when present."""
        names = [self.parameter, self.observable, f"{self.observable}_unwrapped",
                 "p_target", "p_reference", "visibility", "method"]
        if self.family_parameter is not None:
            names.insert(0, self.family_parameter)
        return names

    def values(self, family: float | None = None) -> list[float]:
        """Observable values of one curve, in grid order."""
        return [row.value for row in self.rows if row.family == family]

    def parameters(self, family: float | None = None) -> list[float]:
        return [row.parameter for row in self.rows if row.family == family]


# ============================================================================
# Unit Conversion
# ============================================================================


def convert_units(v_si: float) -> float:
    """Convert a probe speed in m/s to the dimensionless fraction of c.

    Args:
        v_si: Speed in metres per second

    Returns:
        Speed in units of c

    Raises:
        RangeError: If v_si is not in the open interval (0, c)

    Examples:
        >>> convert_units(1000.0)
        3.3356409519815204e-06
        >>> convert_units(1.0)
        3.3356409519815204e-09
    """
    if not math.isfinite(v_si) or not 0.0 < v_si < SPEED_OF_LIGHT:
        raise RangeError(
            f"speed must lie in (0, {SPEED_OF_LIGHT:g}) m/s, got {v_si!r}"
        )
    return v_si / SPEED_OF_LIGHT


# ============================================================================
# Phase and Number Formatting
# ============================================================================


def wrap_phase(angle: float) -> float:
    """Wrap an angle to the half-open interval (-π, π].

    Examples:
        >>> wrap_phase(3 * math.pi / 2)
        -1.5707963267948966
        >>> wrap_phase(-math.pi)
        3.141592653589793
    """
    wrapped = math.remainder(angle, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def format_float(value: float) -> str:
    """Format a float with 17 significant digits for exact round-trips.

    Examples:
        >>> format_float(0.1)
        '0.10000000000000001'
        >>> format_float(2.0)
        '2'
    """
    return format(value, f".{CSV_DIGITS}g")
