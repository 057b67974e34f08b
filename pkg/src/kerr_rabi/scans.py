"""Parameter scans behind the quasienergy, correction and T̃ plots, and the table1 damping audit.

Grid points where the second-order shifts are singular (two bare levels
degenerate at the bare resonance) are reported as NaN rather than dropped.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateLevels
from .analysis import overdamped_ratio, rabi_period_lower_bound
from .experiment import TABLE1, TABLE1_ETA
from .spectrum import (
    OscillatorParams,
    ResonantPair,
    correction_difference,
    correction_difference_linear,
    quasienergy_bare,
    quasienergy_curves,
    resonant_detuning_bare,
)


def kappa_grid(kappa_min: float, kappa_max: float, points: int) -> np.ndarray:
    """Log-spaced grid between two same-signed endpoints."""
    if kappa_min * kappa_max <= 0:
        raise ValueError("kappa range must not contain 0")
    sign = np.sign(kappa_min)
    return sign * np.geomspace(abs(kappa_min), abs(kappa_max), points)


def bare_parabola(params: OscillatorParams, delta: float, n_max: int):
    """Rows (n, ε_n⁽⁰⁾, αε_n⁽⁰⁾/Δ²)."""
    rows = []
    for n in range(n_max + 1):
        e = quasienergy_bare(params, delta, n)
        rows.append((n, e, params.alpha * e / delta**2))
    return ["n", "epsilon", "epsilon_scaled"], rows


def quasienergy_scan(params: OscillatorParams, delta: float, g_grid, cutoff: int = 11, levels=None):
    """Rows (g, ε_k ...) for the tracked levels."""
    curves = quasienergy_curves(params, delta, np.asarray(g_grid, float), cutoff, levels)
    header = ["g"] + [f"eps{int(k)}" for k in curves.labels]
    rows = [(g, *curves.levels[:, i]) for i, g in enumerate(curves.g_grid)]
    return header, rows


def correction_scan(kappas, pairs):
    """Rows (kappa, n, nprime, exact difference, linearised difference) at Δ_res⁽⁰⁾."""
    rows = []
    for pair in pairs:
        for kappa in kappas:
            params = OscillatorParams(float(kappa))
            delta = resonant_detuning_bare(params, pair)
            try:
                exact = correction_difference(params, delta, pair)
            except DegenerateLevels:
                exact = math.nan
            rows.append((float(kappa), pair.n, pair.n_prime, exact, correction_difference_linear(params, pair)))
    return ["kappa", "n", "nprime", "diff_exact", "diff_linear"], rows


def ttilde_scan(kappas, pairs, eta: float = TABLE1_ETA):
    rows = []
    for pair in pairs:
        for kappa in kappas:
            try:
                t = rabi_period_lower_bound(OscillatorParams(float(kappa)), pair, eta)
            except DegenerateLevels:
                t = math.nan
            rows.append((float(kappa), pair.n, pair.n_prime, t))
    return ["kappa", "n", "nprime", "T_tilde"], rows


def audit_table1(eta: float = TABLE1_ETA):
    """Recomputed Γ/(2ω^R) for every table1 preset row at its (g, Δ_full)."""
    rows = []
    for i, (n_prime, n, kappa, g, tau, d_full, _) in enumerate(TABLE1, 1):
        rep = overdamped_ratio(OscillatorParams(kappa), ResonantPair(n, n_prime), g, d_full, eta, tau)
        rows.append((i, rep.gamma, rep.omega_r, rep.ratio, rep.regime.value))
    return ["row", "gamma", "omega_r", "ratio", "regime"], rows
