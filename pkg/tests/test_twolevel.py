import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kerr_rabi.dynamics import DriveSchedule
from kerr_rabi.noise import NoiseChannel, sample_path, derive_seed, white_noise_intensity
from kerr_rabi.spectrum import (
    OscillatorParams,
    ResonantPair,
    rabi_frequency,
    refine_resonance_two_level,
)
from kerr_rabi.twolevel import (
    TwoLevelBlocks,
    analytic_kerr_correlated,
    analytic_kerr_white,
    analytic_overkerr,
    bloch_generator,
    build_blocks,
    correlated_noise_double_integral,
    decay_rate,
    propagate_effective,
    solve_master_equation,
)

KERR = OscillatorParams(0.0)
SOFT = OscillatorParams(-0.025)
PAIR4, PAIR5 = ResonantPair(4), ResonantPair(5)


def synthetic_blocks(gamma, omega):
    """Resonant blocks whose white-noise damping reproduces (Γ, ω^R) with q1 = 1 and V₁₂ = 0."""
    return TwoLevelBlocks(0.0, 0.0, omega, 2 * math.sqrt(gamma), 0.0, 0.0, 5, 0)


class TestBlocks:
    def test_kerr_symmetric(self):
        b = build_blocks(KERR, PAIR5, 0.202931, 2.5)
        assert b.v11 == pytest.approx(b.v22, abs=1e-14)
        assert b.h11 == pytest.approx(b.h22, abs=1e-14)

    def test_row4_v_difference(self):
        b = build_blocks(SOFT, PAIR4, 0.075692, 1.599393)
        assert b.v22 - b.v11 == pytest.approx(-0.064204, abs=2e-6)

    def test_row5_v12(self):
        b = build_blocks(KERR, PAIR5, 0.202931, 2.5)
        assert b.v12 == pytest.approx(2.580e-3, rel=1e-3)
        assert b.h12 == pytest.approx(rabi_frequency(KERR, 2.5, 0.202931, PAIR5), rel=1e-14)

    def test_matrices(self):
        b = build_blocks(SOFT, PAIR5, 0.138884, 1.872634)
        assert np.array_equal(b.h0, b.h0.T) and np.array_equal(b.v1, b.v1.T)
        np.testing.assert_array_equal(b.v2, np.diag([0.0, -5.0]))


class TestEffectivePropagation:
    def test_noise_free_resonance(self):
        b = build_blocks(KERR, PAIR5, 0.202931, 2.5)
        t_end = 6.0e4
        trace = propagate_effective(DriveSchedule(0.202931, 2.5, t_end / 3000, 3000), KERR, PAIR5, stride=1)
        np.testing.assert_allclose(trace.inversion, np.cos(2 * b.h12 * trace.times), atol=1e-9)

    def test_stepped_matches_closed_form(self):
        # a zero-valued path forces the stepping branch
        sched = DriveSchedule(0.202931, 2.5, 30.0, 1000, amplitude_path=np.full(1001, 1e-300))
        stepped = propagate_effective(sched, KERR, PAIR5, stride=10)
        exact = propagate_effective(DriveSchedule(0.202931, 2.5, 30.0, 1000), KERR, PAIR5, stride=10)
        np.testing.assert_allclose(stepped.inversion, exact.inversion, atol=1e-9)

    def test_linearized_close_for_weak_noise(self):
        g0, delta = 0.138884, 1.872634
        omega = rabi_frequency(SOFT, delta, g0, PAIR5)
        n = 6000
        dt = math.pi / omega / n
        path = sample_path(NoiseChannel(0.01 * g0, 100.0), dt, n + 1, derive_seed(3, 0, 1))
        sched = DriveSchedule(g0, delta, dt, n, amplitude_path=path)
        full = propagate_effective(sched, SOFT, PAIR5, mode="full_effective", stride=10)
        lin = propagate_effective(sched, SOFT, PAIR5, mode="linearized", stride=10)
        assert np.max(np.abs(full.inversion - lin.inversion)) < 0.02

    def test_frequency_noise_dephases(self):
        path = sample_path(NoiseChannel(0.002, 100.0, "frequency"), 5.0, 4001, derive_seed(1, 0, 2))
        sched = DriveSchedule(0.202931, 2.5, 5.0, 4000, frequency_path=path)
        trace = propagate_effective(sched, KERR, PAIR5)
        assert np.all(np.abs(trace.inversion) <= 1 + 1e-12)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            propagate_effective(DriveSchedule(0.1, 2.5, 1.0, 2), KERR, PAIR5, mode="exact")


class TestMasterEquation:
    def test_noiseless(self):
        b = build_blocks(KERR, PAIR5, 0.202931, 2.5)
        t = np.linspace(0, 6e4, 501)
        trace = solve_master_equation(b, 0.0, 0.0, t)
        np.testing.assert_allclose(trace.rho_z, 0.5 * np.cos(2 * b.h12 * t), atol=1e-8)

    def test_row6_oracle(self):
        g0 = 0.138884
        delta = refine_resonance_two_level(SOFT, PAIR5, g0)
        q1 = white_noise_intensity(NoiseChannel(0.1 * g0, 100.0))
        assert q1 == pytest.approx(0.0385776, abs=1e-7)
        b = build_blocks(SOFT, PAIR5, g0, delta).replace(v12=0.0)
        gamma, _ = decay_rate(SOFT, PAIR5, g0, delta, q1)
        t = np.linspace(0, 6e4, 401)
        ode = solve_master_equation(b, q1, 0.0, t).inversion
        np.testing.assert_allclose(ode, analytic_overkerr(gamma, abs(b.h12), t), atol=1e-6)

    @pytest.mark.parametrize("ratio", [0.05, 0.3, 0.7, 0.999, 1.0, 1.001, 1.5, 2.5, 5.0, 12.0])
    def test_oracle_across_regimes(self, ratio):
        omega = 1e-3
        gamma = 2 * omega * ratio
        t = np.linspace(0, 5 / omega, 301)
        ode = solve_master_equation(synthetic_blocks(gamma, omega), 1.0, 0.0, t).inversion
        np.testing.assert_allclose(ode, analytic_overkerr(gamma, omega, t), atol=1e-6)

    def test_kerr_white_oracle(self):
        b = build_blocks(KERR, PAIR5, 0.202931, 2.5)
        q1 = 0.823620
        t = np.linspace(0, 1e5, 401)
        ode = solve_master_equation(b, q1, 0.0, t).inversion
        np.testing.assert_allclose(ode, analytic_kerr_white(b.v12, b.h12, q1, t), atol=1e-6)

    def test_bloch_vector_contracts(self):
        b = build_blocks(SOFT, PAIR5, 0.138884, 1.872634)
        trace = solve_master_equation(b, 0.0385776, 0.001, np.linspace(0, 6e4, 2001))
        length = trace.length_squared
        assert length[0] == pytest.approx(0.25)
        assert np.all(np.diff(length) <= 1e-9)

    def test_rejects_negative_intensity(self):
        with pytest.raises(ValueError):
            solve_master_equation(build_blocks(KERR, PAIR5, 0.2, 2.5), -1.0, 0.0, [0.0, 1.0])

    def test_generator_trace_nonpositive(self):
        a = bloch_generator(build_blocks(SOFT, PAIR4, 0.075692, 1.599395), 0.229171, 0.01)
        assert np.trace(a) <= 0


class TestClosedForms:
    def test_initial_value(self):
        assert analytic_overkerr(0.3, 0.1, 0.0) == 1.0
        assert analytic_kerr_white(0.1, 0.2, 0.5, 0.0) == 1.0

    def test_zero_damping(self):
        t = np.linspace(0, 100, 11)
        np.testing.assert_allclose(analytic_overkerr(0.0, 0.05, t), np.cos(0.1 * t), atol=1e-14)

    def test_strong_damping_monotone(self):
        t = np.linspace(0, 1e4, 1001)
        x = analytic_overkerr(1.0, 0.01, t)
        assert np.all(np.diff(x) <= 0) and np.all(x > 0)

    def test_continuous_across_critical(self):
        t = np.linspace(0, 200, 201)
        omega = 0.01
        below = analytic_overkerr(2 * omega * (1 - 1e-9), omega, t)
        at = analytic_overkerr(2 * omega, omega, t)
        above = analytic_overkerr(2 * omega * (1 + 1e-9), omega, t)
        np.testing.assert_allclose(below, at, atol=1e-8)
        np.testing.assert_allclose(above, at, atol=1e-8)
        np.testing.assert_allclose(at, np.exp(-2 * omega * t) * (1 + 2 * omega * t), atol=1e-14)

    @settings(max_examples=100, deadline=None)
    @given(gamma=st.floats(0, 10), omega=st.floats(1e-6, 10), t=st.floats(0, 1e4))
    def test_bounded(self, gamma, omega, t):
        assert -1 - 1e-12 <= analytic_overkerr(gamma, omega, t) <= 1 + 1e-12

    def test_kerr_white_no_noise(self):
        t = np.linspace(0, 10, 5)
        np.testing.assert_array_equal(analytic_kerr_white(0.3, 0.2, 0.0, t), np.cos(0.4 * t))

    def test_row5_decay_time(self):
        b = build_blocks(KERR, PAIR5, 0.202931, 2.5)
        assert 1 / (2 * 0.823620 * b.v12**2) == pytest.approx(9.1e4, rel=0.01)

    def test_correlated_long_time_rate(self):
        channel = NoiseChannel(0.0202931, 1000.0)
        t1, t2 = 1e6, 2e6
        rate = (correlated_noise_double_integral(channel, t2) - correlated_noise_double_integral(channel, t1)) / (t2 - t1)
        assert rate == pytest.approx(white_noise_intensity(channel), rel=1e-12)

    def test_correlated_short_time(self):
        channel = NoiseChannel(0.02, 1000.0)
        t = 1.0
        assert correlated_noise_double_integral(channel, t) == pytest.approx(channel.sigma**2 * t * t, rel=1e-3)

    def test_correlated_without_noise(self):
        t = np.linspace(0, 10, 5)
        np.testing.assert_allclose(
            analytic_kerr_correlated(0.3, 0.2, NoiseChannel(0.0, 5.0), t), np.cos(0.4 * t), atol=1e-15
        )


class TestDecayRate:
    @pytest.mark.parametrize("kappa, n, g, tau, delta, ratio", [
        (-0.025, 3, 0.029492, 2000, 1.274905, 0.0155),
        (-0.025, 4, 0.075692, 2000, 1.599393, 1.13),
        (-0.025, 5, 0.138884, 100, 1.872625, 1.37),
    ])
    def test_table_ratios(self, kappa, n, g, tau, delta, ratio):
        params, pair = OscillatorParams(kappa), ResonantPair(n)
        q1 = white_noise_intensity(NoiseChannel(0.1 * g, tau))
        gamma, disc = decay_rate(params, pair, g, delta, q1)
        omega = rabi_frequency(params, delta, g, pair)
        # the reference ratios carry three significant figures
        assert float(f"{gamma / (2 * omega):.3g}") == ratio
        assert (disc > 0) == (gamma / (2 * omega) > 1)

    def test_row2_intensity(self):
        assert white_noise_intensity(NoiseChannel(0.0029492, 2000)) == pytest.approx(0.0347912, abs=1e-7)

    def test_frequency_noise_universal(self):
        kerr = decay_rate(KERR, PAIR5, 0.2, 2.5, 0.0, 0.01)[0]
        soft = decay_rate(SOFT, PAIR5, 0.14, 1.8726, 0.0, 0.01)[0]
        assert kerr == soft == pytest.approx(0.01 * 25 / 4)
