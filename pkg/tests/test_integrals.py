"""Tests for integrals module."""

import math
import warnings

import pytest


def _fast_setup(**kwargs):
    """Setup at v = 0.3 where the quadrature paths are cheap."""
    from mode_invisibility.common import FastProbeWarning
    from mode_invisibility.integrals import CavitySetup

    options = {"length": 1.0, "beta": 2, "speed": 0.3}
    options.update(kwargs)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FastProbeWarning)
        return CavitySetup(**options)


class TestCavitySetup:
    """Test cavity setup validation and derived quantities."""

    def test_defaults(self):
        """Test the default probe matches 1000 m/s on a unit cavity."""
        from mode_invisibility.common import convert_units
        from mode_invisibility.integrals import CavitySetup

        setup = CavitySetup()
        assert setup.speed == convert_units(1000.0)
        assert setup.gap == pytest.approx(2 * math.pi)
        assert setup.flight_time == pytest.approx(1.0 / setup.speed)
        assert setup.mode_weight(3) == pytest.approx(3 * math.pi)

    def test_non_resonant_gap(self):
        """Test omega is used when resonant is off."""
        from mode_invisibility.integrals import CavitySetup

        setup = CavitySetup(omega=5.0, resonant=False)
        assert setup.gap == 5.0

    def test_invalid_parameters(self):
        """Test length, mode index and speed validation."""
        from mode_invisibility.common import ConfigError
        from mode_invisibility.integrals import CavitySetup

        for kwargs in (
            {"length": 0.0},
            {"length": -1.0},
            {"beta": 0},
            {"beta": True},
            {"speed": 0.0},
            {"speed": 1.0},
            {"coupling": math.nan},
        ):
            with pytest.raises(ConfigError):
                CavitySetup(**kwargs)

    def test_fast_probe_warns(self):
        """Test speeds above 0.01 c warn."""
        from mode_invisibility.common import FastProbeWarning
        from mode_invisibility.integrals import CavitySetup

        with pytest.warns(FastProbeWarning):
            CavitySetup(speed=0.3)


class TestSwitchingProfile:
    """Test linear switching validation."""

    def test_negative_slope_rejected(self):
        from mode_invisibility.common import ConfigError
        from mode_invisibility.integrals import SwitchingProfile

        with pytest.raises(ConfigError):
            SwitchingProfile(-1e-3)

    def test_slope_must_keep_coupling_positive(self):
        """Test εT >= 1 is rejected for the given flight time."""
        from mode_invisibility.common import ConfigError
        from mode_invisibility.integrals import SwitchingProfile

        setup = _fast_setup()
        SwitchingProfile(0.29).check(setup)
        with pytest.raises(ConfigError):
            SwitchingProfile(0.31).check(setup)


class TestKernelI:
    """Test the first-order kernels."""

    def test_even_mode_invisible(self):
        """Test I₋ vanishes exactly for an even mode at resonance."""
        from mode_invisibility.common import KernelMethod, Sign
        from mode_invisibility.integrals import CavitySetup, kernel_I

        for beta in (2, 4, 6):
            kernel = kernel_I(CavitySetup(beta=beta), Sign.MINUS, beta)
            assert kernel.value == 0
            assert kernel.method is KernelMethod.CLOSED_FORM

    def test_odd_mode_amplitude(self):
        """Test −I₋/√(βπ) = −2L/((βπ)^{3/2} v) for an odd mode."""
        from mode_invisibility.common import Sign
        from mode_invisibility.integrals import CavitySetup, kernel_I, mode_amplitude

        for beta in (1, 3, 5):
            setup = CavitySetup(beta=beta)
            amplitude = mode_amplitude(kernel_I(setup, Sign.MINUS, beta), beta)
            expected = -2.0 * setup.length / ((beta * math.pi) ** 1.5 * setup.speed)
            assert amplitude.real == pytest.approx(expected, rel=1e-12)
            assert abs(amplitude.imag) <= 1e-12 * abs(expected)

    def test_closed_form_matches_quadrature(self):
        """Test the closed form against unswitched quadrature."""
        from mode_invisibility.common import KernelMethod, Sign
        from mode_invisibility.integrals import (
            SwitchingProfile,
            kernel_I,
            kernel_I_switched,
        )

        setup = _fast_setup()
        for sign in Sign:
            for kappa in (1, 2, 3):
                exact = kernel_I(setup, sign, kappa).value
                numeric = kernel_I_switched(setup, sign, kappa, SwitchingProfile())
                assert numeric.method is KernelMethod.QUADRATURE
                assert abs(numeric.value - exact) <= 1e-9 * max(abs(exact), 1e-3)

    def test_weighted_quadrature_path(self):
        """Test many oscillations go through weighted quadrature correctly."""
        from mode_invisibility.common import Sign
        from mode_invisibility.integrals import (
            SwitchingProfile,
            kernel_I,
            kernel_I_switched,
        )

        # about 180 periods of the kernel phase
        setup = _fast_setup(speed=0.011)
        exact = kernel_I(setup, Sign.PLUS, 2).value
        numeric = kernel_I_switched(setup, Sign.PLUS, 2, SwitchingProfile()).value
        assert abs(numeric - exact) <= 1e-6 * abs(exact)

    def test_resonant_limit(self):
        """Test w = b takes the regular limit, I = iT/2 for an even mode."""
        from mode_invisibility.common import KernelMethod, Sign
        from mode_invisibility.integrals import CavitySetup, kernel_I

        speed = CavitySetup().speed
        gap = 2 * math.pi * (1.0 - speed)
        setup = CavitySetup(omega=gap, resonant=False)
        kernel = kernel_I(setup, Sign.MINUS, 2)
        assert kernel.method is KernelMethod.RESONANT_LIMIT
        assert kernel.value.imag == pytest.approx(0.5 * setup.flight_time, rel=1e-9)
        assert abs(kernel.value.real) <= 1e-9 * setup.flight_time

    def test_continuous_across_resonance(self):
        """Test a gap just outside the band gives nearly the same value."""
        from mode_invisibility.common import KernelMethod, Sign
        from mode_invisibility.integrals import CavitySetup, kernel_I

        speed = CavitySetup().speed
        rate = 2 * math.pi * speed
        gap = 2 * math.pi - rate * (1.0 + 1e-6)
        setup = CavitySetup(omega=gap, resonant=False)
        kernel = kernel_I(setup, Sign.MINUS, 2)
        assert kernel.method is KernelMethod.CLOSED_FORM
        assert kernel.value.imag == pytest.approx(0.5 * setup.flight_time, rel=1e-4)

    def test_vectorized_matches_scalar(self):
        """Test closed_form_I against kernel_I mode by mode."""
        import numpy as np

        from mode_invisibility.common import Sign
        from mode_invisibility.integrals import CavitySetup, closed_form_I, kernel_I

        setup = CavitySetup()
        kappas = np.arange(1, 9)
        values = closed_form_I(setup, Sign.PLUS, kappas)
        for kappa, value in zip(kappas, values):
            exact = kernel_I(setup, Sign.PLUS, int(kappa)).value
            assert abs(value - exact) <= 1e-7 * abs(exact)

    def test_switched_matches_moment_form(self):
        """Test quadrature with ε > 0 against the exponential-moment form."""
        from mode_invisibility.common import Sign
        from mode_invisibility.integrals import (
            SwitchingProfile,
            closed_form_I,
            kernel_I,
            kernel_I_switched,
            switching_moment,
        )

        setup = _fast_setup()
        epsilon = 0.1
        numeric = kernel_I_switched(setup, Sign.PLUS, 2, SwitchingProfile(epsilon))
        moments = complex(closed_form_I(setup, Sign.PLUS, [2], epsilon)[0])
        linear = kernel_I(setup, Sign.PLUS, 2).value - epsilon * switching_moment(
            setup, Sign.PLUS, 2
        )
        assert abs(numeric.value - moments) <= 1e-8 * abs(moments)
        assert abs(linear - moments) <= 1e-10 * abs(moments)

    def test_conjugation_swaps_signs(self):
        """Test I±,κ at Ω → −Ω equals I∓,κ."""
        from mode_invisibility.common import Sign
        from mode_invisibility.integrals import kernel_C, kernel_I

        for omega in (0.7, 4.0, 13.0):
            forward = _fast_setup(omega=omega, resonant=False)
            backward = _fast_setup(omega=-omega, resonant=False)
            for kappa in (1, 2, 5):
                for sign, other in ((Sign.PLUS, Sign.MINUS), (Sign.MINUS, Sign.PLUS)):
                    assert (
                        kernel_I(forward, sign, kappa).value
                        == kernel_I(backward, other, kappa).value
                    )
                    assert (
                        kernel_C(forward, sign, kappa).value
                        == kernel_C(backward, other, kappa).value
                    )

    def test_random_draws_match_quadrature(self):
        """Test the closed form against quadrature on 50 non-resonant draws."""
        import numpy as np

        from mode_invisibility.common import Sign
        from mode_invisibility.integrals import (
            SwitchingProfile,
            kernel_I,
            kernel_I_switched,
        )

        rng = np.random.default_rng(20240611)
        checked = 0
        while checked < 50:
            setup = _fast_setup(
                length=float(rng.uniform(0.8, 1.5)),
                speed=float(rng.uniform(0.1, 0.5)),
                omega=float(rng.uniform(0.3, 10.0)),
                resonant=False,
            )
            kappa = int(rng.integers(1, 5))
            sign = Sign.PLUS if rng.random() < 0.5 else Sign.MINUS
            w = kappa * math.pi / setup.length + sign.value * setup.gap
            b = kappa * math.pi * setup.speed / setup.length
            if abs(abs(w) - b) < 0.1 * b:
                continue
            exact = kernel_I(setup, sign, kappa).value
            numeric = kernel_I_switched(setup, sign, kappa, SwitchingProfile()).value
            assert abs(numeric - exact) <= 1e-9 * max(abs(exact), 1e-3)
            checked += 1

    def test_invalid_mode(self):
        from mode_invisibility.common import ConfigError, Sign
        from mode_invisibility.integrals import CavitySetup, kernel_I

        for kappa in (0, -1, True):
            with pytest.raises(ConfigError):
                kernel_I(CavitySetup(), Sign.PLUS, kappa)


class TestKernelC:
    """Test the second-order kernels."""

    def test_matches_2d_quadrature(self):
        """Test nested quadrature against the full triangle quadrature."""
        from mode_invisibility.common import KernelMethod, Sign
        from mode_invisibility.integrals import kernel_C, kernel_C_quadrature2d

        setup = _fast_setup(beta=1)
        for sign in Sign:
            for kappa in (1, 2):
                nested = kernel_C(setup, sign, kappa)
                full = kernel_C_quadrature2d(setup, sign, kappa)
                assert nested.method is KernelMethod.QUADRATURE
                assert abs(nested.value - full) <= 1e-7 * abs(full)

    def test_stated_setup_matches_2d_quadrature(self):
        """Test nested against triangle quadrature at v = 1000 m/s, L = 1."""
        from mode_invisibility.common import KernelMethod, Sign
        from mode_invisibility.integrals import (
            CavitySetup,
            kernel_C,
            kernel_C_quadrature2d,
        )

        setup = CavitySetup()
        nested = kernel_C(setup, Sign.MINUS, 2)
        full = kernel_C_quadrature2d(setup, Sign.MINUS, 2)
        assert nested.method is KernelMethod.QUADRATURE
        assert abs(nested.value - full) <= 1e-9 * setup.flight_time**2

        odd = CavitySetup(beta=1)
        nested = kernel_C(odd, Sign.MINUS, 1)
        full = kernel_C_quadrature2d(odd, Sign.MINUS, 1)
        assert nested.method is KernelMethod.QUADRATURE
        assert abs(nested.value - full) <= 1e-9 * abs(full)

    def test_closed_form_matches_quadrature(self):
        """Test the vectorized closed form against nested quadrature."""
        import numpy as np

        from mode_invisibility.common import Sign
        from mode_invisibility.integrals import closed_form_C, kernel_C

        setup = _fast_setup()
        kappas = np.array([1, 3, 4])
        values = closed_form_C(setup, Sign.PLUS, kappas)
        for kappa, value in zip(kappas, values):
            nested = kernel_C(setup, Sign.PLUS, int(kappa)).value
            assert abs(value - nested) <= 1e-8 * abs(nested)

    def test_pair_kernels_match_2d_quadrature(self):
        """Test both pair kernels against a direct triangle integral."""
        from scipy.integrate import dblquad

        from mode_invisibility.integrals import kernel_anomalous

        setup = _fast_setup(beta=1)
        span = setup.flight_time
        b = math.pi * setup.speed / setup.length
        omega_k = setup.frequency(1)
        gap = setup.gap
        cases = {
            False: (-(gap + omega_k), gap - omega_k),
            True: (omega_k - gap, gap + omega_k),
        }
        for creation, (p, q) in cases.items():

            def part(fn, p=p, q=q):
                value, _ = dblquad(
                    lambda y, x: fn(p * x + q * y) * math.sin(b * x) * math.sin(b * y),
                    0.0,
                    span,
                    0.0,
                    lambda x: x,
                    epsabs=1e-12,
                    epsrel=1e-11,
                )
                return value

            direct = complex(part(math.cos), part(math.sin))
            value = kernel_anomalous(setup, 1, creation).value
            assert abs(value - direct) <= 1e-7 * abs(direct)

    def test_resonant_odd_mode(self):
        """Test C₋ = 2/b² for β = 1 at resonance."""
        from mode_invisibility.common import Sign
        from mode_invisibility.integrals import CavitySetup, kernel_C

        setup = CavitySetup(beta=1)
        rate = math.pi * setup.speed / setup.length
        value = kernel_C(setup, Sign.MINUS, 1).value
        assert value.real == pytest.approx(2.0 / rate**2, rel=1e-9)
        assert abs(value.imag) <= 1e-9 * value.real

    def test_resonant_even_mode_vanishes(self):
        """Test C₋ vanishes for β = 2 at resonance."""
        from mode_invisibility.common import Sign
        from mode_invisibility.integrals import CavitySetup, kernel_C

        setup = CavitySetup(beta=2)
        value = kernel_C(setup, Sign.MINUS, 2).value
        assert abs(value) <= 1e-10 * setup.flight_time**2

    def test_counter_rotating_estimate(self):
        """Test C₊ ≈ iL²/(4βπv) for a slow probe."""
        from mode_invisibility.common import KernelMethod, Sign
        from mode_invisibility.integrals import CavitySetup, kernel_C

        setup = CavitySetup()
        kernel = kernel_C(setup, Sign.PLUS, 2)
        expected = setup.length**2 / (4 * 2 * math.pi * setup.speed)
        assert kernel.method is KernelMethod.CLOSED_FORM
        assert kernel.value.imag == pytest.approx(expected, rel=1e-4)
        assert abs(kernel.value.real) <= 1e-3 * expected


class TestTransitionKernels:
    """Test kernel tables over a mode window."""

    def test_build_sorts_and_deduplicates(self):
        from mode_invisibility.integrals import CavitySetup, TransitionKernels

        kernels = TransitionKernels.build(CavitySetup(), [3, 1, 2, 3])
        assert kernels.modes == (1, 2, 3)
        assert kernels.position(2) == 1
        assert len(kernels.c_minus) == 3

    def test_unknown_mode(self):
        from mode_invisibility.common import ConfigError
        from mode_invisibility.integrals import CavitySetup, TransitionKernels

        kernels = TransitionKernels.build(CavitySetup(), [2, 3])
        with pytest.raises(ConfigError):
            kernels.position(5)
        with pytest.raises(ConfigError):
            TransitionKernels.build(CavitySetup(), [])

    def test_methods(self):
        """Test the resonant C₋ is integrated and the rest are closed form."""
        from mode_invisibility.common import KernelMethod
        from mode_invisibility.integrals import CavitySetup, TransitionKernels

        kernels = TransitionKernels.build(CavitySetup(), [2, 3])
        assert kernels.methods == {KernelMethod.CLOSED_FORM, KernelMethod.QUADRATURE}


class TestModeSums:
    """Test the vacuum mode sums."""

    def test_abs_sum_converges(self):
        """Test the |I₊|² sum reports a tail below tolerance."""
        from mode_invisibility.common import FIRST_BATCH, ModeSumKind
        from mode_invisibility.integrals import CavitySetup, vacuum_mode_sum

        total = vacuum_mode_sum(CavitySetup(), ModeSumKind.ABS_I_PLUS_SQ, 1e-6)
        assert isinstance(total.value, float)
        assert total.value > 0.0
        assert total.terms_used >= FIRST_BATCH
        assert total.tail_estimate <= 1e-6 * total.value

    def test_restricted_sum_approaches_full(self):
        """Test the first 1000 modes carry nearly all of the |I₊|² sum."""
        from mode_invisibility.common import ModeSumKind
        from mode_invisibility.integrals import (
            CavitySetup,
            restricted_mode_sum,
            vacuum_mode_sum,
        )

        setup = CavitySetup()
        total = vacuum_mode_sum(setup, ModeSumKind.ABS_I_PLUS_SQ, 1e-6).value
        partial = restricted_mode_sum(setup, ModeSumKind.ABS_I_PLUS_SQ, range(1, 1001))
        assert partial.real == pytest.approx(total, rel=1e-3)
        assert partial.real < total

    def test_restricted_sum_terms(self):
        """Test a two-mode sum equals the explicit terms."""
        from mode_invisibility.common import ModeSumKind, Sign
        from mode_invisibility.integrals import (
            CavitySetup,
            kernel_C,
            restricted_mode_sum,
        )

        setup = CavitySetup()
        expected = sum(
            kernel_C(setup, Sign.PLUS, k).value.conjugate() / (k * math.pi)
            for k in (2, 3)
        )
        value = restricted_mode_sum(setup, ModeSumKind.C_PLUS_CONJ, [2, 3])
        assert value == pytest.approx(expected, rel=1e-14)

    def test_tail_decays_as_inverse_cube(self):
        """Test the fitted exponent of |I₊,γ|²/(k_γL) over γ ∈ [100, 1000]."""
        import numpy as np

        from mode_invisibility.common import Sign
        from mode_invisibility.integrals import CavitySetup, closed_form_I

        gammas = np.arange(100, 1001, dtype=float)
        terms = np.abs(closed_form_I(CavitySetup(), Sign.PLUS, gammas)) ** 2
        terms /= gammas * math.pi
        edges = np.rint(np.geomspace(100, 1001, 11)).astype(int) - 100
        centers = [gammas[lo:hi].mean() for lo, hi in zip(edges[:-1], edges[1:])]
        means = [terms[lo:hi].mean() for lo, hi in zip(edges[:-1], edges[1:])]
        slope = np.polyfit(np.log(centers), np.log(means), 1)[0]
        assert -3.2 <= slope <= -2.8

    def test_invalid_tolerance(self):
        from mode_invisibility.common import ConfigError, ModeSumKind
        from mode_invisibility.integrals import CavitySetup, vacuum_mode_sum

        with pytest.raises(ConfigError):
            vacuum_mode_sum(CavitySetup(), ModeSumKind.ABS_I_PLUS_SQ, 0.0)
