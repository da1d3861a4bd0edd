#!/usr/bin/env python3
"""Exact interaction-picture evolution of the atom ⊗ field system.

The field is truncated to a few cavity modes, each with its own Fock cutoff. The
basis is atom level (g = 0, e = 1) ⊗ lexicographic occupations of the retained
modes in increasing mode order. Every perturbative formula is checked against
this propagator at inflated coupling.
"""

from __future__ import annotations

import cmath
import functools
import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy import sparse
from scipy.integrate import solve_ivp

from .common import (
    HILBERT_BUDGET,
    NORM_DRIFT_LIMIT,
    ORACLE_ATOL,
    ORACLE_REFINEMENTS,
    ORACLE_RTOL,
    STEP_HALVING_TOLERANCE,
    ConfigError,
    NormDrift,
    QuadratureFailure,
    StepFailure,
    TruncationError,
)
from .fockspace import FieldState, Fock, ModeCutoff, build_state, ladder_matrices
from .integrals import CavitySetup, SwitchingProfile

logger = logging.getLogger(__name__)

ComplexArray = NDArray[np.complex128]

# Default per-mode cutoffs for validation runs
VACUUM_CUTOFF = 12
DISPLACED_CUTOFF = 25
CUTOFF_DOUBLINGS = 5

# Tolerances never go below what solve_ivp accepts
_RTOL_FLOOR = 1e-13
_DYSON_RTOL = 1e-12
_DYSON_ATOL = 1e-15


# ============================================================================
# Model Space
# ============================================================================


@dataclass(frozen=True)
class ModelSpace:
    """Retained cavity modes with one Fock cutoff each."""

    mode_indices: tuple[int, ...]
    cutoffs: tuple[ModeCutoff, ...]
    budget: int = HILBERT_BUDGET

    def __post_init__(self) -> None:
        if not self.mode_indices:
            raise ConfigError("model space needs at least one mode")
        if list(self.mode_indices) != sorted(set(self.mode_indices)):
            raise ConfigError(
                f"mode indices must be distinct and increasing: {self.mode_indices}"
            )
        if self.mode_indices[0] < 1:
            raise ConfigError(f"mode indices must be >= 1: {self.mode_indices}")
        if len(self.cutoffs) != len(self.mode_indices):
            raise ConfigError("one cutoff per retained mode is required")
        if self.dim > self.budget:
            raise ConfigError(
                f"model space dimension {self.dim} exceeds budget {self.budget}"
            )

    @classmethod
    def uniform(
        cls, modes: Iterable[int], n_max: int, budget: int = HILBERT_BUDGET
    ) -> ModelSpace:
        """Same cutoff on every mode."""
        indices = tuple(sorted(set(modes)))
        return cls(indices, tuple(ModeCutoff(n_max) for _ in indices), budget)

    @classmethod
    def for_state(
        cls, state: FieldState, modes: Iterable[int], beta: int
    ) -> ModelSpace:
        """Default validation cutoffs: 12 on vacuum modes, probed_cutoff on β.

        Raises:
            TruncationError: If no tried cutoff holds the state
        """
        indices = tuple(sorted(set(modes)))
        probed = probed_cutoff(state)
        vacuum = ModeCutoff(VACUUM_CUTOFF)
        cutoffs = tuple(probed if k == beta else vacuum for k in indices)
        return cls(indices, cutoffs)

    @property
    def dim(self) -> int:
        return 2 * math.prod(cutoff.dim for cutoff in self.cutoffs)

    def check(self, setup: CavitySetup) -> None:
        if setup.beta not in self.mode_indices:
            raise ConfigError(
                f"probed mode {setup.beta} not retained in {self.mode_indices}"
            )

    def basis_index(self, excited: bool, occupations: Sequence[int]) -> int:
        """Position of |atom, n_1, n_2, …⟩ in the lexicographic basis."""
        if len(occupations) != len(self.mode_indices):
            raise ConfigError("one occupation per retained mode is required")
        index = int(excited)
        for n, cutoff in zip(occupations, self.cutoffs):
            if not 0 <= n <= cutoff.n_max:
                raise ConfigError(f"occupation {n} outside cutoff {cutoff.n_max}")
            index = index * cutoff.dim + n
        return index


def probed_cutoff(state: FieldState) -> ModeCutoff:
    """Cutoff for the probed mode.

    Fock(n) gets max(12, n + 9). Displaced and squeezed states get the first of
    25, 50, 100, … that builds within the norm tolerance, so |α|² and sinh²r set
    the size.

    Raises:
        TruncationError: If 25 · 2^CUTOFF_DOUBLINGS levels are still too few
    """
    if isinstance(state, Fock):
        return ModeCutoff(max(VACUUM_CUTOFF, state.n + 9))
    cutoff = ModeCutoff(DISPLACED_CUTOFF)
    for _ in range(CUTOFF_DOUBLINGS):
        try:
            build_state(state, cutoff)
        except TruncationError as e:
            logger.debug("cutoff %d too small: %s", cutoff.n_max, e)
            cutoff = ModeCutoff(2 * cutoff.n_max)
        else:
            return cutoff
    build_state(state, cutoff)
    return cutoff


@dataclass(frozen=True, eq=False)
class TruncatedState:
    """State vector on a ModelSpace."""

    amplitudes: ComplexArray
    space: ModelSpace

    def __post_init__(self) -> None:
        if self.amplitudes.shape != (self.space.dim,):
            raise ConfigError(
                f"state has shape {self.amplitudes.shape}, "
                f"space needs ({self.space.dim},)"
            )
        self.amplitudes.setflags(write=False)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class EvolutionReport:
    """Observables of ψ(T) relative to ψ(0)."""

    survival_amplitude: complex
    p_excite: float
    p_orthogonal: float
    acquired_phase: float
    norm_drift: float
    rtol: float


def embed(state: FieldState, space: ModelSpace, setup: CavitySetup) -> TruncatedState:
    """Ground-state atom ⊗ state on the probed mode ⊗ vacuum elsewhere.

    Raises:
        ConfigError: If the probed mode is not retained
        TruncationError: If the probed-mode cutoff cannot hold the state
    """
    space.check(setup)
    vector = np.array([1.0 + 0j, 0j])
    for kappa, cutoff in zip(space.mode_indices, space.cutoffs):
        if kappa == setup.beta:
            factor = np.asarray(build_state(state, cutoff).amplitudes)
        else:
            factor = np.zeros(cutoff.dim, dtype=np.complex128)
            factor[0] = 1.0
        vector = np.kron(vector, factor)
    return TruncatedState(vector.astype(np.complex128), space)


# ============================================================================
# Hamiltonian
# ============================================================================


@dataclass(frozen=True, eq=False)
class _CouplingOperators:
    """σ⁺ ⊗ a†_κ and σ⁺ ⊗ a_κ on the full space, with their adjoints."""

    raise_create: tuple[sparse.csr_matrix, ...]
    raise_annihilate: tuple[sparse.csr_matrix, ...]
    lower_annihilate: tuple[sparse.csr_matrix, ...]
    lower_create: tuple[sparse.csr_matrix, ...]


@functools.lru_cache(maxsize=16)
def _coupling_operators(space: ModelSpace) -> _CouplingOperators:
    sigma_plus = sparse.csr_matrix(np.array([[0.0, 0.0], [1.0, 0.0]]))
    identities = [sparse.identity(cutoff.dim, format="csr") for cutoff in space.cutoffs]
    create, annihilate = [], []
    for position, cutoff in enumerate(space.cutoffs):
        a, a_dag = ladder_matrices(cutoff)
        factors_a = list(identities)
        factors_a[position] = sparse.csr_matrix(a)
        factors_dag = list(identities)
        factors_dag[position] = sparse.csr_matrix(a_dag)
        op_a, op_dag = sigma_plus, sigma_plus
        for fa, fd in zip(factors_a, factors_dag):
            op_a = sparse.kron(op_a, fa, format="csr")
            op_dag = sparse.kron(op_dag, fd, format="csr")
        create.append(op_dag)
        annihilate.append(op_a)
    return _CouplingOperators(
        raise_create=tuple(create),
        raise_annihilate=tuple(annihilate),
        lower_annihilate=tuple(op.conj().T.tocsr() for op in create),
        lower_create=tuple(op.conj().T.tocsr() for op in annihilate),
    )


def _coefficients(
    t: float, space: ModelSpace, setup: CavitySetup, profile: SwitchingProfile | None
) -> list[tuple[complex, complex]]:
    """Per mode, the coefficients of σ⁺a† and σ⁺a at time t."""
    switching = 1.0 if profile is None else profile.factor(t)
    gap = setup.gap
    coefficients = []
    for kappa in space.mode_indices:
        omega_k = setup.frequency(kappa)
        envelope = (
            setup.coupling
            * switching
            * math.sin(setup.wavenumber(kappa) * setup.speed * t)
            / math.sqrt(setup.mode_weight(kappa))
        )
        coefficients.append(
            (
                envelope * cmath.exp(1j * (gap + omega_k) * t),
                envelope * cmath.exp(1j * (gap - omega_k) * t),
            )
        )
    return coefficients


def hamiltonian_at(
    t: float,
    space: ModelSpace,
    setup: CavitySetup,
    profile: SwitchingProfile | None = None,
) -> sparse.csr_matrix:
    """H_I(t) = λχ(t) Σ_κ (k_κL)^{-1/2} sin(k_κvt) [e^{i(Ω+ω_κ)t} σ⁺a†_κ
    + e^{i(Ω−ω_κ)t} σ⁺a_κ + h.c.] on the retained modes.

    Raises:
        ConfigError: If t lies outside [0, T]
    """
    if not 0.0 <= t <= setup.flight_time:
        raise ConfigError(f"time {t} outside the flight [0, {setup.flight_time}]")
    ops = _coupling_operators(space)
    raising = sparse.csr_matrix((space.dim, space.dim), dtype=np.complex128)
    for (c_create, c_annihilate), create, annihilate in zip(
        _coefficients(t, space, setup, profile), ops.raise_create, ops.raise_annihilate
    ):
        raising = raising + c_create * create + c_annihilate * annihilate
    return (raising + raising.conj().T).tocsr()


def _apply(
    t: float,
    y: ComplexArray,
    space: ModelSpace,
    setup: CavitySetup,
    profile: SwitchingProfile | None,
) -> ComplexArray:
    """H_I(t) y without assembling the matrix."""
    ops = _coupling_operators(space)
    out = np.zeros_like(y)
    for index, (c_create, c_annihilate) in enumerate(
        _coefficients(t, space, setup, profile)
    ):
        out += c_create * (ops.raise_create[index] @ y)
        out += c_annihilate * (ops.raise_annihilate[index] @ y)
        out += c_create.conjugate() * (ops.lower_annihilate[index] @ y)
        out += c_annihilate.conjugate() * (ops.lower_create[index] @ y)
    return out


# ============================================================================
# Propagation
# ============================================================================


def _propagate(
    psi0: TruncatedState,
    setup: CavitySetup,
    profile: SwitchingProfile | None,
    rtol: float,
    atol: float,
) -> ComplexArray:
    space = psi0.space

    def rhs(t: float, y: ComplexArray) -> ComplexArray:
        return -1j * _apply(t, y, space, setup, profile)

    solution = solve_ivp(
        rhs,
        (0.0, setup.flight_time),
        np.array(psi0.amplitudes),
        method="DOP853",
        rtol=rtol,
        atol=atol,
    )
    if not solution.success:
        raise StepFailure(f"time stepping failed at rtol={rtol:g}: {solution.message}")
    return np.asarray(solution.y[:, -1], dtype=np.complex128)


def _excited_population(psi: ComplexArray) -> float:
    half = psi.size // 2
    return float(np.vdot(psi[half:], psi[half:]).real)


def evolve(
    psi0: TruncatedState,
    setup: CavitySetup,
    profile: SwitchingProfile | None = None,
    rtol: float = ORACLE_RTOL,
    atol: float = ORACLE_ATOL,
) -> EvolutionReport:
    """Integrate i∂_t|ψ⟩ = H_I(t)|ψ⟩ over the flight with DOP853 Runge-Kutta.

    Each run is repeated with tolerances tightened by 16 until P_e changes by less
    than STEP_HALVING_TOLERANCE relative.

    Raises:
        StepFailure: If the refinement does not settle within ORACLE_REFINEMENTS runs
        NormDrift: If the final norm deviates from 1 by more than NORM_DRIFT_LIMIT
    """
    psi0.space.check(setup)
    if profile is not None:
        profile.check(setup)

    previous = _propagate(psi0, setup, profile, rtol, atol)
    p_previous = _excited_population(previous)
    for attempt in range(ORACLE_REFINEMENTS):
        rtol = max(rtol / 16.0, _RTOL_FLOOR)
        atol = atol / 16.0
        current = _propagate(psi0, setup, profile, rtol, atol)
        p_current = _excited_population(current)
        change = abs(p_current - p_previous)
        logger.debug(
            "refinement %d: rtol=%.1e, P_e=%.12e, change=%.2e",
            attempt + 1, rtol, p_current, change,
        )
        if change <= STEP_HALVING_TOLERANCE * max(p_current, ORACLE_ATOL):
            break
        previous, p_previous = current, p_current
    else:
        raise StepFailure(
            f"P_e did not settle after {ORACLE_REFINEMENTS} refinements "
            f"(last change {change:.3e})"
        )

    drift = abs(float(np.linalg.norm(current)) - psi0.norm)
    if drift > NORM_DRIFT_LIMIT:
        raise NormDrift(f"norm drifted by {drift:.3e}")

    survival = complex(np.vdot(psi0.amplitudes, current))
    return EvolutionReport(
        survival_amplitude=survival,
        p_excite=min(max(p_current, 0.0), 1.0),
        p_orthogonal=max(1.0 - abs(survival) ** 2, 0.0),
        acquired_phase=cmath.phase(survival),
        norm_drift=drift,
        rtol=rtol,
    )


def dyson_orders(
    psi0: TruncatedState,
    setup: CavitySetup,
    order: int,
    profile: SwitchingProfile | None = None,
) -> list[ComplexArray]:
    """First and optionally second Dyson terms U⁽ᵏ⁾|ψ0⟩.

    φ₁' = −i H ψ0 and φ₂' = −i H φ₁, integrated together from zero.

    Raises:
        ConfigError: If order is not 1 or 2
        QuadratureFailure: If the integration fails
    """
    if order not in (1, 2):
        raise ConfigError(f"Dyson order must be 1 or 2: {order}")
    psi0.space.check(setup)
    space = psi0.space
    dim = space.dim
    initial = np.array(psi0.amplitudes)

    def rhs(t: float, y: ComplexArray) -> ComplexArray:
        first = -1j * _apply(t, initial, space, setup, profile)
        if order == 1:
            return first
        second = -1j * _apply(t, y[:dim], space, setup, profile)
        return np.concatenate([first, second])

    solution = solve_ivp(
        rhs,
        (0.0, setup.flight_time),
        np.zeros(order * dim, dtype=np.complex128),
        method="DOP853",
        rtol=_DYSON_RTOL,
        atol=_DYSON_ATOL,
    )
    if not solution.success:
        raise QuadratureFailure(f"Dyson integration failed: {solution.message}")
    final = np.asarray(solution.y[:, -1], dtype=np.complex128)
    return [final[k * dim : (k + 1) * dim] for k in range(order)]
