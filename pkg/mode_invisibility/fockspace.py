#!/usr/bin/env python3
"""Truncated Fock-space algebra for a single cavity mode.

Builds coherent, squeezed-vacuum and squeezed-coherent states as amplitude vectors
in the number basis, and provides the closed-form moments the perturbative
formulas rely on, so that they can be checked against direct matrix elements.

States are prepared as |ζ, α⟩ = S(ζ) D(α) |0⟩, squeeze applied after
displacement.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm

from .common import (
    CUTOFF_SCALE,
    EXTENSION_FACTOR,
    MIN_CUTOFF,
    NORM_TOLERANCE,
    ConfigError,
    TruncationError,
)

ComplexArray = NDArray[np.complex128]


# ============================================================================
# Dataclasses
# ============================================================================


@dataclass(frozen=True)
class ModeCutoff:
    """Highest Fock level kept for one mode."""

    n_max: int

    def __post_init__(self) -> None:
        if isinstance(self.n_max, bool) or not isinstance(self.n_max, int):
            raise ConfigError(f"n_max must be an integer, got {self.n_max!r}")
        if self.n_max < 1:
            raise ConfigError(f"n_max must be >= 1, got {self.n_max}")

    @property
    def dim(self) -> int:
        """Basis dimension of the mode."""
        return self.n_max + 1


@dataclass(frozen=True)
class SqueezeParams:
    """Squeeze parameter ζ = r e^{iφ}, with φ reduced to [0, 2π)."""

    r: float
    phi: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.r) or self.r < 0.0:
            raise ConfigError(f"squeeze magnitude r must be finite and >= 0: {self.r}")
        if not math.isfinite(self.phi):
            raise ConfigError(f"squeeze phase must be finite: {self.phi}")
        object.__setattr__(self, "phi", self.phi % (2.0 * math.pi))

    @property
    def zeta(self) -> complex:
        return self.r * cmath.exp(1j * self.phi)


def _check_amplitude(alpha: complex) -> complex:
    alpha = complex(alpha)
    if not (math.isfinite(alpha.real) and math.isfinite(alpha.imag)):
        raise ConfigError(f"complex amplitude must be finite: {alpha}")
    return alpha


@dataclass(frozen=True)
class Fock:
    """Number state |n⟩."""

    n: int

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 0:
            raise ConfigError(f"Fock photon number must be an integer >= 0: {self.n!r}")


@dataclass(frozen=True)
class Coherent:
    """Coherent state D(α)|0⟩."""

    alpha: complex

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", _check_amplitude(self.alpha))

    @classmethod
    def polar(cls, magnitude: float, theta: float = 0.0) -> Coherent:
        """Build from |α| and θ."""
        return cls(cmath.rect(magnitude, theta))


@dataclass(frozen=True)
class SqueezedVacuum:
    """Squeezed vacuum S(ζ)|0⟩."""

    squeeze: SqueezeParams


@dataclass(frozen=True)
class SqueezedCoherent:
    """Squeezed coherent state S(ζ)D(α)|0⟩."""

    squeeze: SqueezeParams
    alpha: complex

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", _check_amplitude(self.alpha))

    @classmethod
    def from_relative_phase(
        cls, r: float, magnitude: float, psi: float, phi: float = 0.0
    ) -> SqueezedCoherent:
        """Build from r, |α| and the relative phase Ψ = 2θ − φ.

        Args:
            r: Squeeze magnitude
            magnitude: Displacement magnitude |α|
            psi: Relative phase Ψ
            phi: Squeeze phase φ (θ follows from Ψ and φ)

        Returns:
            SqueezedCoherent with θ = (Ψ + φ)/2
        """
        theta = 0.5 * (psi + phi)
        return cls(SqueezeParams(r, phi), cmath.rect(magnitude, theta))

    @property
    def relative_phase(self) -> float:
        """Ψ = 2θ − φ."""
        return 2.0 * cmath.phase(self.alpha) - self.squeeze.phi


FieldState = Fock | Coherent | SqueezedVacuum | SqueezedCoherent


@dataclass(frozen=True, eq=False)
class FockVector:
    """Renormalized number-basis amplitudes with the recorded truncation defect."""

    amplitudes: ComplexArray
    norm_defect: float
    cutoff: ModeCutoff

    def __post_init__(self) -> None:
        self.amplitudes.setflags(write=False)


# ============================================================================
# Variant Accessors
# ============================================================================


def squeeze_of(state: FieldState) -> SqueezeParams:
    """Squeeze parameters of a state (r = 0 for unsqueezed variants)."""
    if isinstance(state, SqueezedVacuum | SqueezedCoherent):
        return state.squeeze
    return SqueezeParams(0.0)


def displacement_of(state: FieldState) -> complex:
    """Displacement α of a state (0 for Fock and squeezed vacuum)."""
    if isinstance(state, Coherent | SqueezedCoherent):
        return state.alpha
    return 0j


def default_cutoff(state: FieldState) -> ModeCutoff:
    """Default cutoff, max(30, ⌈10(|α|² + e^{2r})⌉); Fock(n) needs at least n.

    Examples:
        >>> default_cutoff(Coherent(1.0)).n_max
        30
        >>> default_cutoff(SqueezedVacuum(SqueezeParams(1.0))).n_max
        74
    """
    if isinstance(state, Fock):
        return ModeCutoff(max(MIN_CUTOFF, state.n))
    alpha = displacement_of(state)
    r = squeeze_of(state).r
    estimate = math.ceil(CUTOFF_SCALE * (abs(alpha) ** 2 + math.exp(2.0 * r)))
    return ModeCutoff(max(MIN_CUTOFF, estimate))


# ============================================================================
# Operators
# ============================================================================


def ladder_matrices(cutoff: ModeCutoff) -> tuple[ComplexArray, ComplexArray]:
    """Truncated annihilation and creation matrices.

    Args:
        cutoff: Mode cutoff

    Returns:
        (a, a_dag) with a|n⟩ = √n|n−1⟩ and a†|n⟩ = √(n+1)|n+1⟩ below the
        top level

    Examples:
        >>> a, a_dag = ladder_matrices(ModeCutoff(1))
        >>> a.real.tolist()
        [[0.0, 1.0], [0.0, 0.0]]
    """
    a = np.diag(np.sqrt(np.arange(1, cutoff.dim, dtype=float)), 1).astype(np.complex128)
    return a, a.conj().T.copy()


def displacement_generator(alpha: complex, cutoff: ModeCutoff) -> ComplexArray:
    """αa† − α*a on the truncated basis."""
    a, a_dag = ladder_matrices(cutoff)
    return alpha * a_dag - np.conj(alpha) * a


def squeeze_generator(squeeze: SqueezeParams, cutoff: ModeCutoff) -> ComplexArray:
    """½(ζ*a² − ζa†²) on the truncated basis."""
    a, a_dag = ladder_matrices(cutoff)
    zeta = squeeze.zeta
    return 0.5 * (np.conj(zeta) * (a @ a) - zeta * (a_dag @ a_dag))


# ============================================================================
# State Construction
# ============================================================================


def build_state(
    state: FieldState,
    cutoff: ModeCutoff | None = None,
    tolerance: float = NORM_TOLERANCE,
) -> FockVector:
    """Realize a field state as a unit vector on the truncated number basis.

    The state is prepared on an extended basis (EXTENSION_FACTOR × n_max) so that the
    weight beyond n_max is measurable; that weight is the recorded norm defect, after
    which the vector is cut to n_max + 1 entries and renormalized.

    Args:
        state: Field state to build
        cutoff: Target cutoff (default: default_cutoff(state))
        tolerance: Largest acceptable norm defect

    Returns:
        FockVector with unit norm and the recorded defect

    Raises:
        TruncationError: If the norm defect exceeds tolerance
    """
    cutoff = cutoff or default_cutoff(state)

    if isinstance(state, Fock):
        if state.n > cutoff.n_max:
            raise TruncationError(
                f"Fock({state.n}) does not fit cutoff n_max={cutoff.n_max}"
            )
        amplitudes = np.zeros(cutoff.dim, dtype=np.complex128)
        amplitudes[state.n] = 1.0
        return FockVector(amplitudes, 0.0, cutoff)

    extended = ModeCutoff(EXTENSION_FACTOR * cutoff.n_max)
    psi = np.zeros(extended.dim, dtype=np.complex128)
    psi[0] = 1.0

    alpha = displacement_of(state)
    squeeze = squeeze_of(state)
    if alpha != 0:
        psi = expm(displacement_generator(alpha, extended)) @ psi
    if squeeze.r != 0:
        psi = expm(squeeze_generator(squeeze, extended)) @ psi

    kept = psi[: cutoff.dim]
    weight = float(np.vdot(kept, kept).real)
    defect = max(0.0, 1.0 - weight / float(np.vdot(psi, psi).real))
    if defect > tolerance:
        raise TruncationError(
            f"norm defect {defect:.3e} exceeds {tolerance:.1e} at n_max="
            f"{cutoff.n_max}; raise the cutoff for |α|={abs(alpha):g}, r={squeeze.r:g}"
        )
    return FockVector(kept / math.sqrt(weight), defect, cutoff)


# ============================================================================
# Moments
# ============================================================================


def expected_photon_number(state: FieldState) -> float:
    """Closed-form ⟨a†a⟩.

    sinh²r + |α|²(cosh²r + sinh²r) − 2 sinh r cosh r |α|² cos(2θ − φ), with
    the obvious reductions for the other variants.

    Examples:
        >>> expected_photon_number(Coherent(2.0))
        4.0
        >>> expected_photon_number(Fock(3))
        3.0
    """
    if isinstance(state, Fock):
        return float(state.n)
    alpha = displacement_of(state)
    squeeze = squeeze_of(state)
    s, c = math.sinh(squeeze.r), math.cosh(squeeze.r)
    interference = (alpha**2 * cmath.exp(-1j * squeeze.phi)).real
    return s * s + abs(alpha) ** 2 * (c * c + s * s) - 2.0 * s * c * interference


def expected_pair_moment(state: FieldState) -> complex:
    """Closed-form ⟨a²⟩.

    For S(ζ)D(α)|0⟩ this is α²cosh²r − e^{iφ} sinh r cosh r (2|α|² + 1)
    + e^{2iφ} sinh²r α*².
    """
    if isinstance(state, Fock):
        return 0j
    alpha = displacement_of(state)
    squeeze = squeeze_of(state)
    s, c = math.sinh(squeeze.r), math.cosh(squeeze.r)
    phase = cmath.exp(1j * squeeze.phi)
    return (
        alpha**2 * c * c
        - phase * s * c * (2.0 * abs(alpha) ** 2 + 1.0)
        + phase**2 * s * s * np.conj(alpha) ** 2
    )


def vector_moments(vector: FockVector) -> tuple[complex, complex, float]:
    """⟨a⟩, ⟨a²⟩ and ⟨a†a⟩ evaluated directly on a built vector."""
    a, _ = ladder_matrices(vector.cutoff)
    psi = vector.amplitudes
    a_psi = a @ psi
    mean = complex(np.vdot(psi, a_psi))
    pair = complex(np.vdot(psi, a @ a_psi))
    number = float(np.vdot(a_psi, a_psi).real)
    return mean, pair, number


def bogoliubov_check(
    squeeze: SqueezeParams,
    cutoff: ModeCutoff,
    guard_band: int | None = None,
) -> float:
    """Largest deviation of S†aS from a cosh r − a†e^{iφ} sinh r, interior block.

    Args:
        squeeze: Squeeze parameters
        cutoff: Truncation of the operator algebra
        guard_band: Top levels excluded from the comparison (default: n_max // 3)

    Returns:
        max |(S†aS − (a cosh r − a† e^{iφ} sinh r))_{jk}|
        over j, k ≤ n_max − guard_band
    """
    if guard_band is None:
        guard_band = cutoff.n_max // 3
    if not 0 <= guard_band <= cutoff.n_max:
        raise ConfigError(f"guard_band must lie in [0, {cutoff.n_max}]: {guard_band}")

    a, a_dag = ladder_matrices(cutoff)
    s_op = expm(squeeze_generator(squeeze, cutoff))
    transformed = s_op.conj().T @ a @ s_op
    expected = a * math.cosh(squeeze.r) - a_dag * (
        cmath.exp(1j * squeeze.phi) * math.sinh(squeeze.r)
    )
    edge = cutoff.dim - guard_band
    return float(np.max(np.abs(transformed - expected)[:edge, :edge]))
