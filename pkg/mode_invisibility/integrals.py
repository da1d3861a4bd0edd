#!/usr/bin/env python3
"""Trajectory integrals for a probe crossing the cavity at constant speed.

First-order kernels

    I±,κ = ∫₀^T e^{i(±Ω+ω_κ)t} sin(k_κ v t) dt,

second-order kernels

    C±,κ = ∫₀^T dt ∫₀^t dt′ e^{i(ω_κ±Ω)(t−t′)}
           × sin(k_κ v t) sin(k_κ v t′),

their switched and anomalous variants, and the convergent vacuum mode sums.
Units are natural (c = 1); the flight time is T = L/v.
"""

from __future__ import annotations

import functools
import logging
import math
import warnings
from collections.abc import Callable, Iterable
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.polynomial import polynomial
from numpy.typing import ArrayLike, NDArray
from scipy import special
from scipy.integrate import IntegrationWarning, dblquad, quad

from .common import (
    FAST_PROBE_SPEED,
    FIRST_BATCH,
    MAX_MODE_TERMS,
    PANEL_THRESHOLD,
    QUAD_EPSABS,
    QUAD_EPSREL,
    QUAD_LIMIT,
    RESONANCE_THRESHOLD,
    TAIL_FIT_POINTS,
    ConfigError,
    FastProbeWarning,
    KernelMethod,
    ModeSumKind,
    NonConvergence,
    QuadratureFailure,
    Sign,
    convert_units,
)

logger = logging.getLogger(__name__)

ComplexArray = NDArray[np.complex128]
FloatArray = NDArray[np.float64]

_SERIES_TERMS = 30
_EPS = float(np.finfo(float).eps)


# ============================================================================
# Dataclasses
# ============================================================================


@dataclass(frozen=True)
class CavitySetup:
    """Cavity geometry, probed mode, atomic gap, probe speed and coupling.

    Attributes:
        length: Cavity length L (natural units, c = 1)
        beta: Probed mode index β
        omega: Atomic gap Ω (ignored when resonant)
        speed: Probe speed v as a fraction of c
        coupling: Dimensionless coupling λ
        resonant: Override Ω with ω_β
    """

    length: float = 1.0
    beta: int = 2
    omega: float = 0.0
    speed: float = convert_units(1000.0)
    coupling: float = 1e-4
    resonant: bool = True

    def __post_init__(self) -> None:
        if not math.isfinite(self.length) or self.length <= 0.0:
            raise ConfigError(f"cavity length must be positive: {self.length}")
        if isinstance(self.beta, bool) or not isinstance(self.beta, int):
            raise ConfigError(f"probed mode index must be an integer: {self.beta!r}")
        if self.beta < 1:
            raise ConfigError(f"probed mode index must be >= 1: {self.beta}")
        if not math.isfinite(self.speed) or not 0.0 < self.speed < 1.0:
            raise ConfigError(f"speed must lie in (0, 1) in units of c: {self.speed}")
        if not math.isfinite(self.omega) or not math.isfinite(self.coupling):
            raise ConfigError("atomic gap and coupling must be finite")
        if self.speed > FAST_PROBE_SPEED:
            warnings.warn(
                f"probe speed v={self.speed:g} exceeds {FAST_PROBE_SPEED} c",
                FastProbeWarning,
                stacklevel=3,
            )

    @property
    def gap(self) -> float:
        """Effective atomic gap Ω."""
        return self.frequency(self.beta) if self.resonant else self.omega

    @property
    def flight_time(self) -> float:
        """T = L/v."""
        return self.length / self.speed

    def wavenumber(self, kappa: int) -> float:
        """k_κ = κπ/L."""
        return kappa * math.pi / self.length

    def frequency(self, kappa: int) -> float:
        """ω_κ = k_κ (c = 1)."""
        return self.wavenumber(kappa)

    def mode_weight(self, kappa: int) -> float:
        """k_κ L."""
        return kappa * math.pi


@dataclass(frozen=True)
class SwitchingProfile:
    """Linear switching χ(t) = 1 − εt."""

    epsilon: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.epsilon) or self.epsilon < 0.0:
            raise ConfigError(
                f"switching slope must be finite and >= 0: {self.epsilon}"
            )

    def check(self, setup: CavitySetup) -> None:
        """Require εT < 1 so the coupling stays positive over the flight."""
        if self.epsilon * setup.flight_time >= 1.0:
            raise ConfigError(
                f"switching slope ε={self.epsilon:g} gives εT="
                f"{self.epsilon * setup.flight_time:g} >= 1"
            )

    def factor(self, t: float) -> float:
        return 1.0 - self.epsilon * t


@dataclass(frozen=True)
class KernelValue:
    """Kernel value, the method that produced it and an absolute error estimate."""

    value: complex
    method: KernelMethod
    est_error: float


@dataclass(frozen=True)
class ModeSum:
    """Result of a vacuum mode sum."""

    value: complex
    terms_used: int
    tail_estimate: float


# ============================================================================
# Exponential Moments
# ============================================================================


def _power_moments(mu: ArrayLike, span: ArrayLike, kmax: int) -> ComplexArray:
    """∫₀^span t^k e^{iμt} dt for k = 0..kmax, shape (kmax + 1, *broadcast shape).

    Integration by parts for |μ span| >= 1, power series below.
    """
    mu_b, span_b = np.broadcast_arrays(
        np.asarray(mu, dtype=float), np.asarray(span, dtype=float)
    )
    shape = mu_b.shape
    mu_arr, span_arr = mu_b.ravel(), span_b.ravel()
    x = mu_arr * span_arr
    small = np.abs(x) < 1.0
    safe_mu = np.where(small, 1.0, mu_arr)
    phase = np.exp(1j * np.where(small, 0.0, x))

    out = np.empty((kmax + 1, *x.shape), dtype=np.complex128)
    prev = (phase - 1.0) / (1j * safe_mu)
    out[0] = prev
    for k in range(1, kmax + 1):
        prev = (span_arr**k * phase - k * prev) / (1j * safe_mu)
        out[k] = prev

    if np.any(small):
        ix = 1j * x[small]
        for k in range(kmax + 1):
            series = polynomial.polyval(ix, _moment_coefficients(k))
            out[k][small] = span_arr[small] ** (k + 1) * series
    return out.reshape((kmax + 1, *shape))


@functools.cache
def _moment_coefficients(k: int) -> FloatArray:
    j = np.arange(_SERIES_TERMS)
    return 1.0 / (special.factorial(j) * (k + j + 1))


@functools.cache
def _nested_coefficients() -> FloatArray:
    ell = np.arange(_SERIES_TERMS)[:, None]
    j = np.arange(_SERIES_TERMS)[None, :]
    return 1.0 / (special.factorial(ell) * special.factorial(j + 1) * (ell + j + 2))


def _exp_integral(mu: ArrayLike, span: ArrayLike) -> ComplexArray:
    """∫₀^span e^{iμt} dt."""
    return _power_moments(mu, span, 0)[0]


def _first_order(
    w: ArrayLike, b: ArrayLike, span: float, epsilon: float = 0.0
) -> ComplexArray:
    """∫₀^T (1 − εt) e^{iwt} sin(bt) dt through exponential moments."""
    w_arr, b_arr = np.broadcast_arrays(np.asarray(w, float), np.asarray(b, float))
    kmax = 1 if epsilon else 0
    up = _power_moments(w_arr + b_arr, span, kmax)
    down = _power_moments(w_arr - b_arr, span, kmax)
    value = (up[0] - down[0]) / 2j
    if epsilon:
        value = value - epsilon * (up[1] - down[1]) / 2j
    return value


def _nested_exponential(mu: FloatArray, a: FloatArray, span: float) -> ComplexArray:
    """G(μ, a) = ∫₀^T dt e^{iμt} ∫₀^t dx e^{iax}."""
    mu_t, a_t = np.abs(mu * span), np.abs(a * span)
    a_large = a_t >= 1.0
    mu_large = ~a_large & (mu_t >= 1.0)
    both_small = ~(a_large | mu_large)

    safe_a = np.where(a_large, a, 1.0)
    safe_mu = np.where(mu_large, mu, 1.0)
    direct = (_exp_integral(mu + a, span) - _exp_integral(mu, span)) / (1j * safe_a)
    swapped = _exp_integral(a, span) * _exp_integral(mu, span) - (
        _exp_integral(a + mu, span) - _exp_integral(a, span)
    ) / (1j * safe_mu)

    result = np.where(a_large, direct, swapped).astype(np.complex128)
    if np.any(both_small):
        mu_s, a_s = 1j * mu[both_small] * span, 1j * a[both_small] * span
        series = polynomial.polyval2d(mu_s, a_s, _nested_coefficients())
        result[both_small] = span * span * series
    return result


def _nested_kernel(
    p: ArrayLike, q: ArrayLike, b: ArrayLike, span: float
) -> ComplexArray:
    """∫₀^T dt e^{ipt} sin(bt) ∫₀^t dt′ e^{iqt′} sin(bt′), closed form."""
    p_b, q_b, b_b = np.broadcast_arrays(
        np.asarray(p, float), np.asarray(q, float), np.asarray(b, float)
    )
    p_arr, q_arr, b_arr = p_b.ravel(), q_b.ravel(), b_b.ravel()
    total = np.zeros(p_arr.shape, dtype=np.complex128)
    for sigma in (1.0, -1.0):
        for tau in (1.0, -1.0):
            total += sigma * tau * _nested_exponential(
                p_arr + sigma * b_arr, q_arr + tau * b_arr, span
            )
    return (-0.25 * total).reshape(p_b.shape)


def _inner_integral(q: float, b: float, t: float) -> complex:
    """∫₀^t e^{iqt′} sin(bt′) dt′."""
    up = _exp_integral(q + b, t)
    down = _exp_integral(q - b, t)
    return complex((up - down) / 2j)


# ============================================================================
# Kernel Frequencies
# ============================================================================


def _detuning(setup: CavitySetup, sign: Sign, kappa: ArrayLike) -> FloatArray:
    """ω_κ ± Ω."""
    return np.asarray(kappa, float) * math.pi / setup.length + sign.value * setup.gap


def _mode_rate(setup: CavitySetup, kappa: ArrayLike) -> FloatArray:
    """k_κ v."""
    return np.asarray(kappa, float) * math.pi * setup.speed / setup.length


def _check_mode(kappa: int) -> None:
    if isinstance(kappa, bool) or not isinstance(kappa, int | np.integer) or kappa < 1:
        raise ConfigError(f"mode index must be an integer >= 1: {kappa!r}")


# ============================================================================
# Quadrature
# ============================================================================


def _quad_part(
    func: Callable[[float], float],
    weight: str | None = None,
    wvar: float = 0.0,
    scale: float = 1.0,
) -> tuple[float, float]:
    """Adaptive quadrature over the unit interval with the module tolerances.

    The absolute tolerance is taken relative to scale, the integrand magnitude;
    QUADPACK cannot resolve cancellations below roundoff of that size. full_output
    silences its warnings and the error estimate is checked here instead.
    """
    epsabs = QUAD_EPSABS * scale
    options: dict[str, Any] = {
        "epsabs": epsabs,
        "epsrel": QUAD_EPSREL,
        "limit": QUAD_LIMIT,
    }
    if weight is not None:
        options.update(weight=weight, wvar=wvar)
    result = quad(func, 0.0, 1.0, full_output=1, **options)
    value, error = float(result[0]), float(result[1])
    if error > max(epsabs, QUAD_EPSREL * abs(value)):
        raise QuadratureFailure(
            f"error estimate {error:.2e} above tolerance for integral {value:.6e}"
        )
    return value, error


def _oscillatory_quad(
    envelope: Callable[[float], float], phase_rate: float
) -> KernelValue:
    """∫₀¹ g(x) e^{iνx} dx for a real envelope g.

    Few oscillations go to plain adaptive quadrature on the real and imaginary
    parts; many go to cosine/sine weighted quadrature.
    """
    periods = abs(phase_rate) / (2.0 * math.pi)
    if periods <= PANEL_THRESHOLD:
        re, re_err = _quad_part(lambda x: envelope(x) * math.cos(phase_rate * x))
        im, im_err = _quad_part(lambda x: envelope(x) * math.sin(phase_rate * x))
    else:
        re, re_err = _quad_part(envelope, "cos", abs(phase_rate))
        im, im_err = _quad_part(envelope, "sin", abs(phase_rate))
        im = math.copysign(1.0, phase_rate) * im
    error = math.hypot(re_err, im_err)
    return KernelValue(complex(re, im), KernelMethod.QUADRATURE, error)


# ============================================================================
# First-Order Kernels
# ============================================================================


def kernel_I(setup: CavitySetup, sign: Sign, kappa: int) -> KernelValue:
    """First-order kernel I±,κ.

    Uses [e^{iwT}(−1)^κ − 1] b / (w² − b²) with w = ω_κ ± Ω and b = k_κ v.
    Inside the relative band |b² − w²| < δ b² around the removable singularity
    the value is taken from the exponential-moment representation, which is
    regular there.

    Args:
        setup: Cavity setup
        sign: Sign of Ω in the exponent
        kappa: Mode index

    Returns:
        KernelValue tagged ClosedForm or ResonantLimit
    """
    _check_mode(kappa)
    w = float(_detuning(setup, sign, kappa))
    b = float(_mode_rate(setup, kappa))
    span = setup.flight_time
    denominator = w * w - b * b

    if abs(denominator) < RESONANCE_THRESHOLD * b * b:
        logger.debug("I%s,%d near removable singularity; using limit", sign.name, kappa)
        value = complex(_first_order(w, b, span))
        return KernelValue(value, KernelMethod.RESONANT_LIMIT, 8 * _EPS * abs(value))

    parity = 1.0 if kappa % 2 == 0 else -1.0
    boundary = complex(math.cos(w * span), math.sin(w * span)) * parity
    value = (boundary - 1.0) * b / denominator
    error = 4 * _EPS * (1.0 + abs(w * span)) * abs(b / denominator)
    return KernelValue(value, KernelMethod.CLOSED_FORM, error)


def kernel_I_switched(
    setup: CavitySetup, sign: Sign, kappa: int, profile: SwitchingProfile
) -> KernelValue:
    """First-order kernel with linear switching, by adaptive quadrature.

    ∫₀^T (1 − εt) e^{i(±Ω+ω_κ)t} sin(k_κ v t) dt, integrated on the rescaled
    interval t = T x.

    Raises:
        ConfigError: If εT >= 1
        QuadratureFailure: If the quadrature misses its tolerance
    """
    _check_mode(kappa)
    profile.check(setup)
    span = setup.flight_time
    w = float(_detuning(setup, sign, kappa))
    slope = profile.epsilon * span
    mode_phase = kappa * math.pi

    def envelope(x: float) -> float:
        return (1.0 - slope * x) * math.sin(mode_phase * x)

    scaled = _oscillatory_quad(envelope, w * span)
    return KernelValue(scaled.value * span, scaled.method, scaled.est_error * span)


def closed_form_I(
    setup: CavitySetup, sign: Sign, kappas: ArrayLike, epsilon: float = 0.0
) -> ComplexArray:
    """Vectorized I±,κ (optionally switched) over an array of mode indices."""
    return _first_order(
        _detuning(setup, sign, kappas),
        _mode_rate(setup, kappas),
        setup.flight_time,
        epsilon,
    )


def switching_moment(setup: CavitySetup, sign: Sign, kappa: int) -> complex:
    """Switching moment ∫₀^T t e^{i(±Ω+ω_κ)t} sin(k_κ v t) dt."""
    w = _detuning(setup, sign, kappa)
    b = _mode_rate(setup, kappa)
    up = _power_moments(w + b, setup.flight_time, 1)
    down = _power_moments(w - b, setup.flight_time, 1)
    return complex((up[1] - down[1]) / 2j)


def mode_amplitude(kernel: KernelValue, kappa: int) -> complex:
    """Kernel with the mode normalization folded in, −I/√(κπ).

    At resonance this is [(−1)^β − 1] L / ((βπ)^{3/2} v).
    """
    return -kernel.value / math.sqrt(kappa * math.pi)


# ============================================================================
# Second-Order Kernels
# ============================================================================


def _nested_quadrature(
    setup: CavitySetup, p: float, q: float, kappa: int
) -> KernelValue:
    """Outer quadrature over the closed-form inner integral, on t = T x."""
    span = setup.flight_time
    b = float(_mode_rate(setup, kappa))

    def integrand(x: float) -> complex:
        t = span * x
        return complex(np.exp(1j * p * t)) * math.sin(b * t) * _inner_integral(q, b, t)

    samples = np.linspace(0.0, 1.0, 4 * PANEL_THRESHOLD + 1)
    scale = max(abs(integrand(x)) for x in samples) or 1.0
    re, re_err = _quad_part(lambda x: integrand(x).real, scale=scale)
    im, im_err = _quad_part(lambda x: integrand(x).imag, scale=scale)
    error = math.hypot(re_err, im_err) * span
    return KernelValue(complex(re, im) * span, KernelMethod.QUADRATURE, error)


def _nested(setup: CavitySetup, p: float, q: float, kappa: int) -> KernelValue:
    span = setup.flight_time
    periods = max(abs(p), abs(q)) * span / (2.0 * math.pi)
    if periods <= PANEL_THRESHOLD:
        return _nested_quadrature(setup, p, q, kappa)
    logger.debug("nested kernel, mode %d, %.3g periods: closed form", kappa, periods)
    value = complex(_nested_kernel(p, q, _mode_rate(setup, kappa), span))
    error = 16 * _EPS * (1.0 + periods) * span * span
    return KernelValue(value, KernelMethod.CLOSED_FORM, error)


def kernel_C(setup: CavitySetup, sign: Sign, kappa: int) -> KernelValue:
    """Second-order kernel C±,κ.

    The inner t′-integral is closed form. The outer integral is adaptive quadrature
    while the integrand spans at most PANEL_THRESHOLD periods; beyond that the outer
    integral is also taken in closed form.

    Raises:
        QuadratureFailure: If the outer quadrature misses its tolerance
    """
    _check_mode(kappa)
    w = float(_detuning(setup, sign, kappa))
    return _nested(setup, w, -w, kappa)


def kernel_anomalous(setup: CavitySetup, kappa: int, creation: bool) -> KernelValue:
    """Second-order pair kernel multiplying ⟨a²⟩ (creation=False) or ⟨a†²⟩.

    ∫₀^T dt ∫₀^t dt′ e^{−iΩ(t−t′)} e^{∓iω_κ(t+t′)}
        × sin(k_κ v t) sin(k_κ v t′).
    """
    _check_mode(kappa)
    omega_k = setup.frequency(kappa)
    gap = setup.gap
    if creation:
        return _nested(setup, omega_k - gap, gap + omega_k, kappa)
    return _nested(setup, -(gap + omega_k), gap - omega_k, kappa)


def closed_form_C(setup: CavitySetup, sign: Sign, kappas: ArrayLike) -> ComplexArray:
    """Vectorized C±,κ over an array of mode indices."""
    w = _detuning(setup, sign, kappas)
    return _nested_kernel(w, -w, _mode_rate(setup, kappas), setup.flight_time)


def kernel_C_quadrature2d(setup: CavitySetup, sign: Sign, kappa: int) -> complex:
    """C±,κ by full 2-D quadrature over the triangle 0 <= t′ <= t <= T."""
    span = setup.flight_time
    rate = float(_detuning(setup, sign, kappa)) * span
    mode_phase = kappa * math.pi

    def part(fn: Callable[[float], float]) -> float:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            value, _ = dblquad(
                lambda y, x: fn(rate * (x - y))
                * math.sin(mode_phase * x)
                * math.sin(mode_phase * y),
                0.0,
                1.0,
                0.0,
                lambda x: x,
                epsabs=QUAD_EPSABS,
                epsrel=QUAD_EPSREL,
            )
        return float(value)

    return complex(part(math.cos), part(math.sin)) * span * span


# ============================================================================
# Kernel Tables
# ============================================================================


@dataclass(frozen=True, eq=False)
class TransitionKernels:
    """I± and C± over a window of modes, built once and shared read-only."""

    setup: CavitySetup
    modes: tuple[int, ...]
    i_plus: tuple[KernelValue, ...]
    i_minus: tuple[KernelValue, ...]
    c_plus: tuple[KernelValue, ...]
    c_minus: tuple[KernelValue, ...]

    @classmethod
    def build(cls, setup: CavitySetup, modes: Iterable[int]) -> TransitionKernels:
        """Evaluate all four kernels for every mode of the window."""
        window = tuple(sorted(set(modes)))
        if not window:
            raise ConfigError("mode window must not be empty")
        return cls(
            setup=setup,
            modes=window,
            i_plus=tuple(kernel_I(setup, Sign.PLUS, k) for k in window),
            i_minus=tuple(kernel_I(setup, Sign.MINUS, k) for k in window),
            c_plus=tuple(kernel_C(setup, Sign.PLUS, k) for k in window),
            c_minus=tuple(kernel_C(setup, Sign.MINUS, k) for k in window),
        )

    def position(self, kappa: int) -> int:
        try:
            return self.modes.index(kappa)
        except ValueError:
            raise ConfigError(f"mode {kappa} not in window {self.modes}") from None

    def mode_sum(self, kind: ModeSumKind) -> complex:
        """Finite sum of the vacuum terms over the window."""
        total = 0j
        for kappa, i_plus, c_plus in zip(self.modes, self.i_plus, self.c_plus):
            weight = self.setup.mode_weight(kappa)
            if kind is ModeSumKind.ABS_I_PLUS_SQ:
                total += abs(i_plus.value) ** 2 / weight
            else:
                total += c_plus.value.conjugate() / weight
        return total

    @property
    def methods(self) -> set[KernelMethod]:
        kernels = self.i_plus + self.i_minus + self.c_plus + self.c_minus
        return {kernel.method for kernel in kernels}


# ============================================================================
# Vacuum Mode Sums
# ============================================================================


def _mode_terms(
    setup: CavitySetup, kind: ModeSumKind, gammas: FloatArray, epsilon: float
) -> ComplexArray:
    weights = gammas * math.pi
    if kind is ModeSumKind.ABS_I_PLUS_SQ:
        values = closed_form_I(setup, Sign.PLUS, gammas, epsilon)
        return np.asarray(np.abs(values) ** 2 / weights, dtype=np.complex128)
    return np.conj(closed_form_C(setup, Sign.PLUS, gammas)) / weights


def _power_law_tail(magnitudes: FloatArray) -> float:
    """Tail beyond the last term from an A γ^{-p} fit over the last decade.

    The last decade is split into TAIL_FIT_POINTS logarithmic bins; bin means
    smooth the oscillating factor before the log-log fit.
    """
    last = magnitudes.size
    edges = np.unique(np.geomspace(last // 10, last, TAIL_FIT_POINTS + 1).astype(int))
    centers, means = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        block = magnitudes[lo:hi]
        if block.size and block.mean() > 0.0:
            centers.append(0.5 * (lo + hi + 1))
            means.append(block.mean())
    if len(centers) < TAIL_FIT_POINTS // 4:
        return math.inf
    slope, intercept = np.polyfit(np.log(centers), np.log(means), 1)
    p = -float(slope)
    if p <= 1.0:
        return math.inf
    return float(math.exp(intercept) * last ** (1.0 - p) / (p - 1.0))


def vacuum_mode_sum(
    setup: CavitySetup,
    kind: ModeSumKind,
    rel_tol: float,
    profile: SwitchingProfile | None = None,
) -> ModeSum:
    """Σ_γ |I₊,γ|²/(k_γL) or Σ_γ C*₊,γ/(k_γL) over all cavity modes.

    Terms are added in doubling batches until the fitted tail falls below
    rel_tol × |partial sum|. A switching profile applies to the |I₊|² sum only.

    Args:
        setup: Cavity setup
        kind: Which sum
        rel_tol: Relative tolerance on the tail
        profile: Optional linear switching

    Returns:
        ModeSum with the partial sum, number of terms and tail estimate

    Raises:
        ConfigError: If rel_tol <= 0
        NonConvergence: If MAX_MODE_TERMS terms do not reach rel_tol
    """
    if not rel_tol > 0.0:
        raise ConfigError(f"rel_tol must be positive: {rel_tol}")
    epsilon = 0.0
    if profile is not None and kind is ModeSumKind.ABS_I_PLUS_SQ:
        profile.check(setup)
        epsilon = profile.epsilon
    return _cached_mode_sum(setup, kind, rel_tol, epsilon)


@functools.lru_cache(maxsize=256)
def _cached_mode_sum(
    setup: CavitySetup, kind: ModeSumKind, rel_tol: float, epsilon: float
) -> ModeSum:
    chunks: list[ComplexArray] = []
    used = 0
    batch = FIRST_BATCH
    tail = math.inf
    while used < MAX_MODE_TERMS:
        upper = min(used + batch, MAX_MODE_TERMS)
        gammas = np.arange(used + 1, upper + 1, dtype=float)
        chunks.append(_mode_terms(setup, kind, gammas, epsilon))
        used = upper
        batch = used

        terms = np.concatenate(chunks)
        partial = complex(terms.sum())
        tail = _power_law_tail(np.abs(terms))
        logger.debug(
            "%s: %d terms, partial=%r, tail=%.3e", kind.value, used, partial, tail
        )
        if tail <= rel_tol * abs(partial):
            value = partial.real if kind is ModeSumKind.ABS_I_PLUS_SQ else partial
            return ModeSum(value, used, tail)

    raise NonConvergence(
        f"{kind.value} sum not converged after {used} terms "
        f"(tail {tail:.3e}, rel_tol {rel_tol:g})"
    )


def restricted_mode_sum(
    setup: CavitySetup, kind: ModeSumKind, modes: Iterable[int]
) -> complex:
    """The same vacuum sum restricted to an explicit mode set."""
    return TransitionKernels.build(setup, modes).mode_sum(kind)
