"""Regime diagnostics and bounds for noisy multi-photon Rabi oscillations."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import KerrDegenerate, ResonantTarget
from .noise import NoiseChannel, Target, white_noise_intensity
from .spectrum import (
    DEGENERACY_TOL,
    OscillatorParams,
    ResonantPair,
    correction_difference,
    dressed_pair_states,
    hamiltonian_matrix,
    rabi_coefficient,
    rabi_frequency,
    resonant_detuning_bare,
)
from .twolevel import decay_rate

DEFAULT_SAFETY = 5.0
CRITICAL_BAND = 1e-3


class Regime(str, enum.Enum):
    UNDERDAMPED = "underdamped"
    CRITICAL = "critical"
    OVERDAMPED = "overdamped"


@dataclass(frozen=True)
class RegimeReport:
    gamma: float
    omega_r: float
    ratio: float
    regime: Regime
    discriminant: float
    tau_min_applicability: float
    two_level_valid: bool
    white_noise_valid: bool


def classify(ratio: float) -> Regime:
    if abs(ratio - 1.0) < CRITICAL_BAND:
        return Regime.CRITICAL
    return Regime.OVERDAMPED if ratio > 1.0 else Regime.UNDERDAMPED


def applicability_min_tau(
    params: OscillatorParams, pair: ResonantPair, g0: float, eta: float, delta0: float | None = None
) -> float:
    """Correlation-time scale 4π η² g₀² / (α² ω^R) above which the two-level model holds.

    ``delta0`` defaults to the bare resonance.
    """
    if delta0 is None:
        delta0 = resonant_detuning_bare(params, pair)
    omega_r = abs(rabi_frequency(params, delta0, g0, pair))
    if not omega_r > 0:
        raise ValueError("Rabi frequency must be positive")
    return 4 * math.pi * eta**2 * g0**2 / (params.alpha**2 * omega_r)


def escape_probability(
    params: OscillatorParams,
    pair: ResonantPair,
    k: int,
    g0: float,
    channel: NoiseChannel,
    duration: float,
    delta0: float | None = None,
    cutoff: int = 11,
) -> float:
    """First-order probability of a noise-induced jump from |n'⟩ to level ``k``.

    Matrix elements of a + a† (amplitude noise) or a†a (frequency noise)
    are taken between dressed eigenstates of the mean-drive Hamiltonian.
    """
    if delta0 is None:
        delta0 = resonant_detuning_bare(params, pair)
    if not channel.enabled:
        return 0.0
    dim = cutoff + 1
    if k in (pair.n, pair.n_prime):
        raise ResonantTarget(f"level {k} belongs to the resonant pair")
    ham = hamiltonian_matrix(params, g0, delta0, dim)
    vals, vecs = np.linalg.eigh(ham)
    start, _ = dressed_pair_states(params, g0, delta0, pair, dim)
    target_idx = int(np.argmax(vecs[k] ** 2))
    target = vecs[:, target_idx]
    gap = float(vals[target_idx] - start @ ham @ start)
    if abs(gap) < DEGENERACY_TOL:
        raise ResonantTarget(f"level {k} is degenerate with level {pair.n_prime}")
    levels = np.arange(dim, dtype=float)
    if channel.target is Target.AMPLITUDE:
        coupling = np.diag(np.sqrt(levels[1:]), 1)
        coupling = coupling + coupling.T
    else:
        coupling = np.diag(levels)
    element = float(target @ coupling @ start)
    q = white_noise_intensity(channel)
    return q * element**2 * duration / (1 + gap**2 * channel.tau**2)


def overdamped_ratio(
    params: OscillatorParams,
    pair: ResonantPair,
    g0: float,
    delta0: float,
    eta: float,
    tau: float,
    q2: float = 0.0,
    safety: float = DEFAULT_SAFETY,
) -> RegimeReport:
    """Γ/(2ω^R) for relative amplitude noise η = σ/g₀ with correlation time τ.

    The white-noise check requires τ shorter than both 1/ω^R and 1/Γ by
    ``safety``; the two-level check requires τ above the applicability
    scale by the same factor.
    """
    q1 = white_noise_intensity(NoiseChannel(eta * g0, tau))
    gamma, disc = decay_rate(params, pair, g0, delta0, q1, q2)
    omega_r = abs(rabi_frequency(params, delta0, g0, pair))
    ratio = gamma / (2 * omega_r)
    tau_min = applicability_min_tau(params, pair, g0, eta, delta0)
    return RegimeReport(
        gamma=gamma,
        omega_r=omega_r,
        ratio=ratio,
        regime=classify(ratio),
        discriminant=disc,
        tau_min_applicability=tau_min,
        two_level_valid=tau >= safety * tau_min,
        white_noise_valid=safety * tau * max(omega_r, gamma) < 1.0,
    )


def _bound_inputs(params: OscillatorParams, pair: ResonantPair) -> tuple[float, float, int]:
    p = pair.order
    if p < 3:
        raise ValueError("the overdamping bounds need n - n' >= 3")
    delta = resonant_detuning_bare(params, pair)
    diff = abs(correction_difference(params, delta, pair))
    if diff < DEGENERACY_TOL * 1e-6 or params.kappa == 0:
        raise KerrDegenerate("correction difference vanishes (Kerr limit)")
    return diff, abs(rabi_coefficient(params, delta, pair)), p


def overdamp_g_upper_bound(params: OscillatorParams, pair: ResonantPair, eta: float) -> float:
    """Drive amplitude below which white-noise overdamping is reachable."""
    diff, omega, p = _bound_inputs(params, pair)
    return (math.sqrt(2 * math.pi) * eta * diff / omega) ** (1.0 / (p - 2))


def rabi_period_lower_bound(params: OscillatorParams, pair: ResonantPair, eta: float) -> float:
    """Smallest Rabi period T̃ at which the overdamped regime is reachable."""
    diff, omega, p = _bound_inputs(params, pair)
    return 2 * math.pi / omega * (omega / (math.sqrt(2 * math.pi) * eta * diff)) ** (p / (p - 2))
