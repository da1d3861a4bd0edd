#!/usr/bin/env python3
"""Second-order observables of an atom flying through a cavity.

Assembles transition probabilities, acquired phases, interferometric phase
differences, resolutions, visibility and the switching stability curve from the
kernels in ``integrals`` and the state moments in ``fockspace``.

The probed mode β carries the field state; every other mode is in vacuum. All
functions take an optional ``modes`` argument that replaces the infinite vacuum
sums by finite sums over exactly those modes, which is how results are matched
against the exact propagator.
"""

from __future__ import annotations

import cmath
import logging
import math
import warnings
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from .common import (
    BRANCH_THRESHOLD,
    DEFAULT_REL_TOL,
    SMALL_PHASE_LIMIT,
    UNIT_DISK_SLACK,
    WEAK_ADIABATIC_THRESHOLD,
    BranchWarning,
    ConfigError,
    ModeSumKind,
    Sign,
    SmallPhaseWarning,
    SweepResult,
    SweepRow,
    WeakAdiabaticViolation,
    wrap_phase,
)
from .fockspace import (
    Coherent,
    FieldState,
    Fock,
    SqueezedCoherent,
    SqueezedVacuum,
    SqueezeParams,
    displacement_of,
    expected_pair_moment,
    squeeze_of,
)
from .integrals import (
    CavitySetup,
    KernelValue,
    SwitchingProfile,
    TransitionKernels,
    kernel_anomalous,
    kernel_C,
    kernel_I,
    kernel_I_switched,
    vacuum_mode_sum,
)

logger = logging.getLogger(__name__)

# C sums converge as γ^{-2}; this keeps them well inside the term budget
PHASE_REL_TOL = 1e-5


# ============================================================================
# Dataclasses
# ============================================================================


@dataclass(frozen=True)
class ProbabilityBreakdown:
    """Per-term record of a transition probability (λ² included in every term)."""

    resonant_mode_term: float
    squeeze_term: float
    interference_term: float
    vacuum_sum_term: float

    def total(self) -> float:
        return (
            self.resonant_mode_term
            + self.squeeze_term
            + self.interference_term
            + self.vacuum_sum_term
        )


@dataclass(frozen=True)
class ProbabilityResult:
    """Excitation probability P_e with its breakdown."""

    p_excite: float
    breakdown: ProbabilityBreakdown

    @property
    def weak_adiabatic(self) -> bool:
        """True when P_e is below the weak-adiabatic threshold."""
        return self.p_excite < WEAK_ADIABATIC_THRESHOLD


@dataclass(frozen=True)
class PhaseResult:
    """η = −i ln A with A the survival amplitude; γ = Re η."""

    eta: complex
    gamma: float
    survival_amplitude: complex

    @property
    def within_unit_disk(self) -> bool:
        return abs(self.survival_amplitude) <= 1.0 + UNIT_DISK_SLACK


@dataclass(frozen=True)
class InterferometryConfig:
    """Target and reference arms of the atomic interferometer, one shared setup."""

    target: FieldState
    reference: FieldState
    setup: CavitySetup


# ============================================================================
# Resolution Queries
# ============================================================================


def _check_gap(gap: float, name: str) -> None:
    if not math.isfinite(gap) or gap <= 0.0:
        raise ConfigError(f"{name} must be strictly positive: {gap}")


@dataclass(frozen=True)
class FockGap:
    """Fock states n and n + m."""

    n: int
    m: int

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ConfigError(f"photon number n must be >= 0: {self.n}")
        if self.m < 1:
            raise ConfigError(f"gap m must be >= 1: {self.m}")

    def states(self) -> tuple[FieldState, FieldState]:
        return Fock(self.n), Fock(self.n + self.m)


@dataclass(frozen=True)
class CoherentGap:
    """Displacements |α| and |α| + δα at fixed r and Ψ."""

    magnitude: float
    delta: float
    r: float = 0.0
    psi: float = 0.0

    def __post_init__(self) -> None:
        _check_gap(self.delta, "δα")

    def states(self) -> tuple[FieldState, FieldState]:
        if self.r == 0.0:
            return (
                Coherent.polar(self.magnitude, 0.5 * self.psi),
                Coherent.polar(self.magnitude + self.delta, 0.5 * self.psi),
            )
        return (
            SqueezedCoherent.from_relative_phase(self.r, self.magnitude, self.psi),
            SqueezedCoherent.from_relative_phase(
                self.r, self.magnitude + self.delta, self.psi
            ),
        )


@dataclass(frozen=True)
class SqueezeGap:
    """Squeezing r and r + δr at fixed |α| and Ψ."""

    r: float
    delta: float
    magnitude: float = 0.0
    psi: float = 0.0

    def __post_init__(self) -> None:
        _check_gap(self.delta, "δr")

    def states(self) -> tuple[FieldState, FieldState]:
        if self.magnitude == 0.0:
            return (
                SqueezedVacuum(SqueezeParams(self.r)),
                SqueezedVacuum(SqueezeParams(self.r + self.delta)),
            )
        return (
            SqueezedCoherent.from_relative_phase(self.r, self.magnitude, self.psi),
            SqueezedCoherent.from_relative_phase(
                self.r + self.delta, self.magnitude, self.psi
            ),
        )


@dataclass(frozen=True)
class RelPhaseGap:
    """Relative phases Ψ and Ψ + δΨ at fixed r and |α|."""

    psi: float
    delta: float
    r: float
    magnitude: float

    def __post_init__(self) -> None:
        _check_gap(self.delta, "δΨ")

    def states(self) -> tuple[FieldState, FieldState]:
        return (
            SqueezedCoherent.from_relative_phase(self.r, self.magnitude, self.psi),
            SqueezedCoherent.from_relative_phase(
                self.r, self.magnitude, self.psi + self.delta
            ),
        )


ResolutionQuery = FockGap | CoherentGap | SqueezeGap | RelPhaseGap


# ============================================================================
# State Weights
# ============================================================================


def _state_weights(state: FieldState) -> tuple[float, float, float]:
    """Split ⟨a†a⟩ into displacement, squeeze and interference pieces.

    (cosh²r + sinh²r)|α|², sinh²r and −2 sinh r cosh r Re(α² e^{−iφ}); a Fock
    state puts n in the first slot.
    """
    if isinstance(state, Fock):
        return float(state.n), 0.0, 0.0
    alpha = displacement_of(state)
    squeeze = squeeze_of(state)
    s, c = math.sinh(squeeze.r), math.cosh(squeeze.r)
    interference = (alpha**2 * cmath.exp(-1j * squeeze.phi)).real
    return (c * c + s * s) * abs(alpha) ** 2, s * s, -2.0 * s * c * interference


def photon_weight(state: FieldState) -> float:
    """W(state) = ⟨a†a⟩ as it enters the probability and phase formulas."""
    return sum(_state_weights(state))


def _check_window(
    setup: CavitySetup, modes: Iterable[int] | None
) -> tuple[int, ...] | None:
    if modes is None:
        return None
    window = tuple(sorted(set(modes)))
    if setup.beta not in window:
        raise ConfigError(
            f"mode set {window} must contain the probed mode {setup.beta}"
        )
    return window


# ============================================================================
# Transition Probability
# ============================================================================


def _resonant_kernels(
    setup: CavitySetup, profile: SwitchingProfile | None
) -> tuple[KernelValue, KernelValue]:
    if profile is None or profile.epsilon == 0.0:
        return (
            kernel_I(setup, Sign.MINUS, setup.beta),
            kernel_I(setup, Sign.PLUS, setup.beta),
        )
    return (
        kernel_I_switched(setup, Sign.MINUS, setup.beta, profile),
        kernel_I_switched(setup, Sign.PLUS, setup.beta, profile),
    )


def _abs_vacuum_sum(
    setup: CavitySetup,
    rel_tol: float,
    window: tuple[int, ...] | None,
    profile: SwitchingProfile | None,
) -> float:
    if window is None:
        total = vacuum_mode_sum(setup, ModeSumKind.ABS_I_PLUS_SQ, rel_tol, profile)
        return float(total.value.real)
    if profile is None or profile.epsilon == 0.0:
        kernels = TransitionKernels.build(setup, window)
        return kernels.mode_sum(ModeSumKind.ABS_I_PLUS_SQ).real
    return sum(
        abs(kernel_I_switched(setup, Sign.PLUS, k, profile).value) ** 2
        / setup.mode_weight(k)
        for k in window
    )


def transition_probability(
    state: FieldState,
    setup: CavitySetup,
    rel_tol: float = DEFAULT_REL_TOL,
    modes: Iterable[int] | None = None,
    profile: SwitchingProfile | None = None,
) -> ProbabilityResult:
    """Second-order excitation probability of a ground-state atom.

    P = λ²[(|I₋,β|² + |I₊,β|²)/(k_βL) · W + Σ_γ |I₊,γ|²/(k_γL)]

    Args:
        state: Field state of the probed mode
        setup: Cavity setup
        rel_tol: Relative tolerance of the vacuum sum
        modes: Restrict the vacuum sum to these modes (must contain β)
        profile: Linear switching applied to every kernel

    Returns:
        ProbabilityResult whose p_excite is the sum of its breakdown

    Raises:
        NonConvergence: If the vacuum sum does not converge
    """
    window = _check_window(setup, modes)
    i_minus, i_plus = _resonant_kernels(setup, profile)
    coupling_sq = setup.coupling**2
    resonant = coupling_sq * (abs(i_minus.value) ** 2 + abs(i_plus.value) ** 2)
    resonant /= setup.mode_weight(setup.beta)

    displacement, squeeze, interference = _state_weights(state)
    vacuum = coupling_sq * _abs_vacuum_sum(setup, rel_tol, window, profile)
    breakdown = ProbabilityBreakdown(
        resonant_mode_term=resonant * displacement,
        squeeze_term=resonant * squeeze,
        interference_term=resonant * interference,
        vacuum_sum_term=vacuum,
    )
    result = ProbabilityResult(breakdown.total(), breakdown)
    logger.debug("P_e(%s) = %.6e", state, result.p_excite)
    return result


# ============================================================================
# Phases
# ============================================================================


def _phase_bracket(
    state: FieldState,
    setup: CavitySetup,
    rel_tol: float,
    window: tuple[int, ...] | None,
) -> complex:
    """X = (C*₊,β + C₋,β)/(k_βL) · W(state) + Σ_γ C*₊,γ/(k_γL)."""
    c_plus = kernel_C(setup, Sign.PLUS, setup.beta).value
    c_minus = kernel_C(setup, Sign.MINUS, setup.beta).value
    resonant = (c_plus.conjugate() + c_minus) / setup.mode_weight(setup.beta)
    if window is None:
        vacuum = complex(vacuum_mode_sum(setup, ModeSumKind.C_PLUS_CONJ, rel_tol).value)
    else:
        kernels = TransitionKernels.build(setup, window)
        vacuum = kernels.mode_sum(ModeSumKind.C_PLUS_CONJ)
    return resonant * photon_weight(state) + vacuum


def phase(
    state: FieldState,
    setup: CavitySetup,
    rel_tol: float = PHASE_REL_TOL,
    modes: Iterable[int] | None = None,
) -> PhaseResult:
    """Phase acquired by the atom, η = −i ln[1 − λ² X], principal branch.

    Warns:
        BranchWarning: If |λ² X| > 0.5
    """
    window = _check_window(setup, modes)
    correction = setup.coupling**2 * _phase_bracket(state, setup, rel_tol, window)
    if abs(correction) > BRANCH_THRESHOLD:
        warnings.warn(
            f"|λ²⟨U⁽²⁾⟩| = {abs(correction):.3g} "
            f"exceeds {BRANCH_THRESHOLD}; "
            "logarithm outside the perturbative regime",
            BranchWarning,
            stacklevel=2,
        )
    amplitude = 1.0 - correction
    eta = -1j * cmath.log(amplitude)
    return PhaseResult(eta=eta, gamma=eta.real, survival_amplitude=amplitude)


def small_phase(
    state: FieldState,
    setup: CavitySetup,
    rel_tol: float = PHASE_REL_TOL,
    modes: Iterable[int] | None = None,
) -> float:
    """Linearized phase γ ≃ −Im(λ² X), valid for |γ| ≪ 1."""
    window = _check_window(setup, modes)
    value = -(setup.coupling**2 * _phase_bracket(state, setup, rel_tol, window)).imag
    if abs(value) >= SMALL_PHASE_LIMIT:
        warnings.warn(
            f"small-phase form used at |γ| = {abs(value):.3g}",
            SmallPhaseWarning,
            stacklevel=2,
        )
    return value


def second_order_overlap(
    state: FieldState,
    setup: CavitySetup,
    rel_tol: float = PHASE_REL_TOL,
    modes: Iterable[int] | None = None,
) -> complex:
    """Complete ⟨ψ0|U⁽²⁾|ψ0⟩ with the pair terms in ⟨a²⟩ and ⟨a†²⟩.

    −λ²[X + (⟨a²⟩ A_β + ⟨a†²⟩ B_β)/(k_βL)], which reduces to −λ² X when
    ⟨a²⟩ = 0.
    """
    window = _check_window(setup, modes)
    bracket = _phase_bracket(state, setup, rel_tol, window)
    pair = complex(expected_pair_moment(state))
    if pair != 0:
        annihilate = kernel_anomalous(setup, setup.beta, creation=False).value
        create = kernel_anomalous(setup, setup.beta, creation=True).value
        bracket += (pair * annihilate + pair.conjugate() * create) / setup.mode_weight(
            setup.beta
        )
    return -(setup.coupling**2) * bracket


# ============================================================================
# Interferometry
# ============================================================================


def _check_arms(
    config: InterferometryConfig, rel_tol: float, window: tuple[int, ...] | None
) -> tuple[float, float]:
    probabilities = []
    for arm, state in (("target", config.target), ("reference", config.reference)):
        result = transition_probability(state, config.setup, rel_tol, window)
        if not result.weak_adiabatic:
            raise WeakAdiabaticViolation(
                f"{arm} arm P_e = {result.p_excite:.3e} >= {WEAK_ADIABATIC_THRESHOLD}"
            )
        probabilities.append(result.p_excite)
    return probabilities[0], probabilities[1]


def interferometric_phase(
    config: InterferometryConfig,
    rel_tol: float = PHASE_REL_TOL,
    modes: Iterable[int] | None = None,
) -> float:
    """Δγ = Re[−i ln(A_target/A_reference)], wrapped to (−π, π].

    Raises:
        WeakAdiabaticViolation: If either arm has P_e >= 1e-6
    """
    window = _check_window(config.setup, modes)
    _check_arms(config, DEFAULT_REL_TOL, window)
    target = phase(config.target, config.setup, rel_tol, window)
    reference = phase(config.reference, config.setup, rel_tol, window)
    ratio = target.survival_amplitude / reference.survival_amplitude
    return wrap_phase(cmath.phase(ratio))


def visibility(config: InterferometryConfig, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """Fringe visibility √((1 − P_target)(1 − P_reference)).

    Raises:
        WeakAdiabaticViolation: If either arm has P_e >= 1e-6
    """
    p_target, p_reference = _check_arms(config, rel_tol, None)
    return math.sqrt((1.0 - p_target) * (1.0 - p_reference))


def resolution(
    query: ResolutionQuery,
    config: InterferometryConfig,
    rel_tol: float = PHASE_REL_TOL,
) -> float:
    """Difference of interferometric phases at the two query points.

    Δγ(first) − Δγ(second) against config.reference; config.target is ignored.
    For FockGap this is Δγ_n − Δγ_{n+m}.
    """
    first, second = query.states()
    return interferometric_phase(
        InterferometryConfig(first, config.reference, config.setup), rel_tol
    ) - interferometric_phase(
        InterferometryConfig(second, config.reference, config.setup), rel_tol
    )


def fock_reference_resolution(
    n: int,
    m: int,
    config: InterferometryConfig,
    rel_tol: float = PHASE_REL_TOL,
) -> float:
    """R_m(n) = Δγ(n + m) − Δγ(n) against config.reference, usually a Fock state."""
    gap = FockGap(n, m)
    return -resolution(gap, config, rel_tol)


def small_phase_resolution(query: ResolutionQuery, setup: CavitySetup) -> float:
    """Small-phase resolution −λ² Im[(C*₊,β + C₋,β)/(k_βL)] ΔW.

    The vacuum sums and the reference arm cancel; for FockGap this is linear in m.
    """
    first, second = query.states()
    c_plus = kernel_C(setup, Sign.PLUS, setup.beta).value
    c_minus = kernel_C(setup, Sign.MINUS, setup.beta).value
    resonant = (c_plus.conjugate() + c_minus) / setup.mode_weight(setup.beta)
    shift = photon_weight(first) - photon_weight(second)
    return -(setup.coupling**2 * resonant * shift).imag


# ============================================================================
# Stability Under Switching
# ============================================================================


def _loglog_slope(epsilons: Sequence[float], excess: Sequence[float]) -> float:
    """Least-squares slope of log(excess) against log(ε) over the positive points."""
    points = [(e, d) for e, d in zip(epsilons, excess) if e > 0.0 and d > 0.0]
    if len(points) < 2:
        return math.nan
    x = np.log([e for e, _ in points])
    y = np.log([d for _, d in points])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def stability_curve(
    setup: CavitySetup,
    state: FieldState,
    epsilons: Sequence[float],
    rel_tol: float = DEFAULT_REL_TOL,
) -> SweepResult:
    """P_e(ε) under linear switching, with the log-log slope of P_e(ε) − P_e(0).

    Raises:
        ConfigError: If any ε gives εT >= 1
        QuadratureFailure: If a switched kernel quadrature fails
    """
    profiles = [SwitchingProfile(epsilon) for epsilon in epsilons]
    for profile in profiles:
        profile.check(setup)

    baseline = transition_probability(state, setup, rel_tol).p_excite
    result = SweepResult(parameter="epsilon", observable="stability")
    excess = []
    for index, profile in enumerate(profiles):
        switched = transition_probability(state, setup, rel_tol, profile=profile)
        p_excite = switched.p_excite
        excess.append(p_excite - baseline)
        result.rows.append(
            SweepRow(
                index=index,
                parameter=profile.epsilon,
                value=p_excite,
                p_target=p_excite,
                method="quadrature" if profile.epsilon else "closed_form",
            )
        )
    result.metadata["baseline"] = baseline
    result.metadata["slope"] = _loglog_slope(list(epsilons), excess)
    logger.debug(
        "stability slope %.4f over %d points", result.metadata["slope"], len(profiles)
    )
    return result
