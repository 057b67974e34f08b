"""Two-level effective model of a resonant pair (|n'⟩, |n⟩).

Basis order is (|n'⟩, |n⟩) throughout: index 0 is the lower Fock level.
Stochastic propagation is exact per step for the 2x2 Hamiltonian; the
noise-averaged dynamics in the white-noise limit follow a GKSL equation
whose Bloch-vector form is solved numerically and, in special cases, in
closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import _stepping
from .dynamics import DriveSchedule, InversionTrace
from .noise import NoiseChannel
from .spectrum import (
    OscillatorParams,
    ResonantPair,
    correction_difference,
    quasienergy_bare,
    rabi_coefficient,
    second_order_correction,
)

MODES = ("full_effective", "linearized")
CRITICAL_SWITCH = 1e-8


@dataclass(frozen=True)
class TwoLevelBlocks:
    """Entries of H₀, V₁ (amplitude noise) and V₂ (frequency noise)."""

    h11: float
    h22: float
    h12: float
    v11: float
    v22: float
    v12: float
    n: int
    n_prime: int

    @property
    def h0(self) -> np.ndarray:
        return np.array([[self.h11, self.h12], [self.h12, self.h22]])

    @property
    def v1(self) -> np.ndarray:
        return np.array([[self.v11, self.v12], [self.v12, self.v22]])

    @property
    def v2(self) -> np.ndarray:
        return np.diag([-float(self.n_prime), -float(self.n)])

    def replace(self, **changes) -> "TwoLevelBlocks":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return TwoLevelBlocks(**fields)


@dataclass
class BlochTrace:
    times: np.ndarray
    rho_x: np.ndarray
    rho_y: np.ndarray
    rho_z: np.ndarray

    @property
    def inversion(self) -> np.ndarray:
        return 2.0 * self.rho_z

    @property
    def length_squared(self) -> np.ndarray:
        return self.rho_x**2 + self.rho_y**2 + self.rho_z**2


def build_blocks(params: OscillatorParams, pair: ResonantPair, g0: float, delta0: float) -> TwoLevelBlocks:
    n, m, p = pair.n, pair.n_prime, pair.order
    e2_low = second_order_correction(params, delta0, m)
    e2_up = second_order_correction(params, delta0, n)
    omega = rabi_coefficient(params, delta0, pair)
    return TwoLevelBlocks(
        h11=quasienergy_bare(params, delta0, m) + e2_low * g0**2,
        h22=quasienergy_bare(params, delta0, n) + e2_up * g0**2,
        h12=omega * g0**p,
        v11=2 * e2_low * g0,
        v22=2 * e2_up * g0,
        v12=omega * p * g0 ** (p - 1),
        n=n,
        n_prime=m,
    )


def _step_2x2(psi: np.ndarray, d1, d2, c, h: float) -> np.ndarray:
    """Apply exp(-i h [[d1, c], [c, d2]]) up to a global phase, batched."""
    bz = 0.5 * (d1 - d2)
    r = np.sqrt(bz * bz + c * c)
    cos = np.cos(r * h)
    # sin(rh)/r with the r -> 0 limit
    sinc = h * np.sinc(r * h / np.pi)
    p0, p1 = psi[:, 0], psi[:, 1]
    out = np.empty_like(psi)
    out[:, 0] = cos * p0 - 1j * sinc * (bz * p0 + c * p1)
    out[:, 1] = cos * p1 - 1j * sinc * (c * p0 - bz * p1)
    return out


def propagate_effective(
    schedule: DriveSchedule,
    params: OscillatorParams,
    pair: ResonantPair,
    *,
    mode: str = "full_effective",
    hold: str = "linear",
    max_substep: float = 1.0,
    stride: int | None = None,
    blocks: TwoLevelBlocks | None = None,
) -> InversionTrace:
    """Stochastic propagation of the effective model, starting in |n'⟩.

    ``full_effective`` keeps g(t)² on the diagonal and g(t)^{n-n'} off it;
    ``linearized`` uses H₀ + ξ₁V₁ + ξ₂V₂. Frequency noise enters the
    diagonal as -ξ₂ n' and -ξ₂ n in both modes.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    b = blocks or build_blocks(params, pair, schedule.g0, schedule.delta0)
    g0, p = schedule.g0, pair.order
    e0_low = quasienergy_bare(params, schedule.delta0, pair.n_prime)
    e0_up = quasienergy_bare(params, schedule.delta0, pair.n)
    e2_low = second_order_correction(params, schedule.delta0, pair.n_prime)
    e2_up = second_order_correction(params, schedule.delta0, pair.n)
    omega = rabi_coefficient(params, schedule.delta0, pair)

    def entries(xi1, xi2):
        if mode == "linearized":
            x = 0.0 if xi1 is None else xi1
            d1, d2, c = b.h11 + x * b.v11, b.h22 + x * b.v22, b.h12 + x * b.v12
        else:
            g = g0 if xi1 is None else g0 + xi1
            g2 = g * g
            d1, d2, c = e0_low + e2_low * g2, e0_up + e2_up * g2, omega * g**p
        if xi2 is not None:
            d1 = d1 - xi2 * pair.n_prime
            d2 = d2 - xi2 * pair.n
        return d1, d2, c

    if stride is None:
        stride = _stepping.default_stride(schedule.n_steps)
    idx = _stepping.record_indices(schedule.n_steps, stride)
    times = idx * schedule.dt
    batch = schedule.batch

    if not schedule.noisy:
        d1, d2, c = entries(None, None)
        psi0 = np.zeros((times.size, 2), dtype=complex)
        psi0[:, 0] = 1.0
        bz = 0.5 * (d1 - d2)
        r = np.hypot(bz, c)
        cos = np.cos(r * times)
        sinc = times * np.sinc(r * times / np.pi)
        up = np.abs(-1j * sinc * c) ** 2
        low = np.abs(cos - 1j * sinc * bz) ** 2
        inv = np.broadcast_to(low - up, (batch, times.size))
        return InversionTrace(times, inv if schedule.batched else inv[0].copy())

    n_sub = _stepping.substeps(schedule.dt, hold, max_substep)
    h = schedule.dt / n_sub
    psi = np.zeros((batch, 2), dtype=complex)
    psi[:, 0] = 1.0
    inv = np.empty((batch, idx.size))
    inv[:, 0] = 1.0
    rec = 1
    amp, freq = schedule.amplitude_path, schedule.frequency_path
    for k in range(schedule.n_steps):
        xi1 = _stepping.sample_within_step(amp, k, n_sub, hold)
        xi2 = _stepping.sample_within_step(freq, k, n_sub, hold)
        for s in range(n_sub):
            d1, d2, c = entries(xi1[s], xi2[s])
            psi = _step_2x2(psi, d1, d2, c, h)
        if rec < idx.size and idx[rec] == k + 1:
            inv[:, rec] = np.abs(psi[:, 0]) ** 2 - np.abs(psi[:, 1]) ** 2
            rec += 1
    return InversionTrace(times, inv if schedule.batched else inv[0])


def bloch_generator(blocks: TwoLevelBlocks, q1: float, q2: float) -> np.ndarray:
    """Matrix A of d(ρx, ρy, ρz)/dt = A (ρx, ρy, ρz) for the white-noise GKSL equation."""
    dv = blocks.v11 - blocks.v22
    dh = blocks.h22 - blocks.h11
    v12 = blocks.v12
    freq = q2 * (blocks.n - blocks.n_prime) ** 2
    cross = q1 * v12 * dv
    return np.array(
        [
            [-0.5 * (q1 * dv**2 + freq), dh, cross],
            [-dh, -0.5 * (q1 * (4 * v12**2 + dv**2) + freq), -2 * blocks.h12],
            [cross, 2 * blocks.h12, -2 * q1 * v12**2],
        ]
    )


def solve_master_equation(
    blocks: TwoLevelBlocks, q1: float, q2: float, times, rtol: float = 1e-10, atol: float = 1e-13
) -> BlochTrace:
    """Integrate the Bloch equations from ρz = 1/2 (system in |n'⟩) with DOP853."""
    if q1 < 0 or q2 < 0:
        raise ValueError("noise intensities must be >= 0")
    times = np.asarray(times, dtype=float)
    a = bloch_generator(blocks, q1, q2)
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite master-equation coefficients")
    sol = solve_ivp(
        lambda _, y: a @ y,
        (0.0, float(times[-1])),
        [0.0, 0.0, 0.5],
        method="DOP853",
        t_eval=times,
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise RuntimeError(f"master equation integration failed: {sol.message}")
    return BlochTrace(times, *sol.y)


def analytic_overkerr(gamma: float, omega_r: float, t):
    """e^{-Γt}[cosh(t√D) + (Γ/√D) sinh(t√D)], D = Γ² - 4ω^R², on every branch of D."""
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    disc = gamma**2 - 4 * omega_r**2
    x2 = disc * t * t
    out = np.empty_like(t)
    near = np.abs(x2) < CRITICAL_SWITCH
    # series around D = 0: cosh ~ 1 + x²/2, sinh(x)/√D ~ t(1 + x²/6)
    tn, xn = t[near], x2[near]
    out[near] = np.exp(-gamma * tn) * (1 + xn / 2 + gamma * tn * (1 + xn / 6))
    tf = t[~near]
    if disc > 0:
        root = np.sqrt(disc)
        fast = np.exp(-(gamma + root) * tf)
        slow = np.exp(-(gamma - root) * tf)
        out[~near] = 0.5 * (slow + fast) + 0.5 * gamma / root * (slow - fast)
    elif disc < 0:
        root = np.sqrt(-disc)
        out[~near] = np.exp(-gamma * tf) * (np.cos(root * tf) + gamma / root * np.sin(root * tf))
    else:
        out[~near] = np.exp(-gamma * tf) * (1 + gamma * tf)
    return float(out[0]) if scalar else out


def decay_rate(
    params: OscillatorParams, pair: ResonantPair, g0: float, delta0: float, q1: float, q2: float = 0.0
) -> tuple[float, float]:
    """Γ = Q₁g₀²(ε_n⁽²⁾ - ε_n'⁽²⁾)² + Q₂(n - n')²/4 and D = Γ² - 4(ω^R)²."""
    diff = correction_difference(params, delta0, pair)
    gamma = q1 * g0**2 * diff**2 + q2 * pair.order**2 / 4
    omega_r = rabi_coefficient(params, delta0, pair) * g0**pair.order
    return gamma, gamma**2 - 4 * omega_r**2


def analytic_kerr_white(v12: float, h12: float, q1: float, t):
    """Kerr-oscillator inversion under white amplitude noise: damped cosine."""
    t = np.asarray(t, dtype=float)
    return np.exp(-2 * q1 * v12**2 * t) * np.cos(2 * h12 * t)


def correlated_noise_double_integral(channel: NoiseChannel, t):
    """∬_{[0,t]²} σ² e^{-|t'-t''|/τ} dt' dt'' = 2σ²τ[t - τ(1 - e^{-t/τ})]."""
    t = np.asarray(t, dtype=float)
    tau = channel.tau
    return 2 * channel.sigma**2 * tau * (t + tau * np.expm1(-t / tau))


def analytic_kerr_correlated(v12: float, h12: float, channel: NoiseChannel, t):
    """Kerr-oscillator inversion for exponentially correlated amplitude noise."""
    t = np.asarray(t, dtype=float)
    return np.exp(-2 * v12**2 * correlated_noise_double_integral(channel, t)) * np.cos(2 * h12 * t)
