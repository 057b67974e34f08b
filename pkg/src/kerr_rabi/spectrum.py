"""Quasienergy structure of the driven Kerr / over-Kerr oscillator.

Everything here works in the frame rotating with the drive, where the
Hamiltonian is

    H = -Δ a†a + (α/2)(a†a)² + κ(a†a)³ + g(a + a†).

The closed forms (bare levels, second-order shifts, multi-photon Rabi
frequency, resonant detunings) are complemented by numerical
diagonalisation of the truncated Hamiltonian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment, minimize_scalar

from .errors import CutoffTooSmall, DegenerateLevels, NoRoot, NoTransfer

DEGENERACY_TOL = 1e-6
BRACKET_HALF_WIDTH = 0.2


@dataclass(frozen=True)
class OscillatorParams:
    """Nonlinearity coefficients.

    ``alpha`` sets the energy unit (keep it at 1 to read every other
    quantity as a ratio to α); ``kappa`` is the sixth-order coefficient.
    """

    kappa: float = 0.0
    alpha: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if abs(self.kappa / self.alpha) > 0.25:
            raise ValueError(f"|kappa/alpha| must be <= 0.25, got {self.kappa / self.alpha}")


@dataclass(frozen=True)
class ResonantPair:
    """Upper level ``n`` and lower level ``n_prime`` of a multi-photon transition."""

    n: int
    n_prime: int = 0

    def __post_init__(self):
        if self.n_prime < 0:
            raise ValueError("n_prime must be >= 0")
        if self.n - self.n_prime < 2:
            raise ValueError(f"need n - n_prime >= 2, got {self.n} - {self.n_prime}")

    @property
    def order(self) -> int:
        """Number of drive quanta absorbed, n - n'."""
        return self.n - self.n_prime


@dataclass
class QuasienergyCurve:
    """Eigenvalues of the truncated Hamiltonian tracked along a drive grid.

    ``levels[j]`` is the curve continued from Fock state ``labels[j]`` at
    g = 0, ``overlaps[j]`` the weight of that state's dominant Fock component.
    """

    g_grid: np.ndarray
    labels: np.ndarray
    levels: np.ndarray
    overlaps: np.ndarray
    vectors: np.ndarray = field(repr=False)

    def level(self, k: int) -> np.ndarray:
        return self.levels[int(np.flatnonzero(self.labels == k)[0])]


def quasienergy_bare(params: OscillatorParams, delta: float, n) -> float:
    """ε_n⁽⁰⁾ = -Δn + (α/2)n² + κn³."""
    if np.any(np.asarray(n) < 0):
        raise ValueError("level index must be >= 0")
    return -delta * n + 0.5 * params.alpha * n * n + params.kappa * n * n * n


def _check_gap(gap: float, n: int, k: int) -> None:
    if abs(gap) < DEGENERACY_TOL:
        raise DegenerateLevels(f"levels {n} and {k} are degenerate (gap {gap:.3e})")


def second_order_correction(params: OscillatorParams, delta: float, n: int) -> float:
    """Coefficient of g² in the quasienergy of level ``n``."""
    e_n = quasienergy_bare(params, delta, n)
    gap_up = e_n - quasienergy_bare(params, delta, n + 1)
    _check_gap(gap_up, n, n + 1)
    total = (n + 1) / gap_up
    if n > 0:
        gap_down = e_n - quasienergy_bare(params, delta, n - 1)
        _check_gap(gap_down, n, n - 1)
        total += n / gap_down
    return total


def correction_difference(params: OscillatorParams, delta: float, pair: ResonantPair) -> float:
    """ε_n⁽²⁾ - ε_n'⁽²⁾, with cancellation below rounding level returned as 0."""
    upper = second_order_correction(params, delta, pair.n)
    lower = second_order_correction(params, delta, pair.n_prime)
    diff = upper - lower
    # Kerr symmetry makes the two terms equal; only rounding survives.
    if abs(diff) <= 16 * np.finfo(float).eps * (abs(upper) + abs(lower)):
        return 0.0
    return diff


def correction_difference_linear(params: OscillatorParams, pair: ResonantPair) -> float:
    """O(κ) approximation of the correction difference at the bare resonance."""
    n, m = pair.n, pair.n_prime
    return 4 * (n - m) * (n + m + 1) * params.kappa / (params.alpha**2 * ((n - m) ** 2 - 1))


def rabi_coefficient(params: OscillatorParams, delta: float, pair: ResonantPair) -> float:
    """g-independent prefactor ω_{n,n'} of the multi-photon Rabi frequency."""
    n, m = pair.n, pair.n_prime
    factorial_ratio = math.prod(range(m + 1, n + 1))
    e_n = quasienergy_bare(params, delta, n)
    coeff = math.sqrt(factorial_ratio)
    for k in range(m + 1, n):
        gap = e_n - quasienergy_bare(params, delta, k)
        _check_gap(gap, n, k)
        coeff /= gap
    return coeff


def rabi_frequency(params: OscillatorParams, delta: float, g: float, pair: ResonantPair) -> float:
    """Multi-photon Rabi frequency ω^R = ω_{n,n'} g^{n-n'}."""
    return rabi_coefficient(params, delta, pair) * g**pair.order


def resonant_detuning_bare(params: OscillatorParams, pair: ResonantPair) -> float:
    n, m = pair.n, pair.n_prime
    return 0.5 * params.alpha * (n + m) + params.kappa * (n * n + n * m + m * m)


def resonant_detuning_perturbative(params: OscillatorParams, pair: ResonantPair, g: float) -> float:
    """Resonant detuning to second order in g."""
    d0 = resonant_detuning_bare(params, pair)
    if g == 0:
        return d0
    return d0 + correction_difference(params, d0, pair) / pair.order * g * g


def _two_level_mismatch(params: OscillatorParams, pair: ResonantPair, g: float, delta: float) -> float:
    g2 = g * g
    upper = quasienergy_bare(params, delta, pair.n) + second_order_correction(params, delta, pair.n) * g2
    lower = quasienergy_bare(params, delta, pair.n_prime) + second_order_correction(
        params, delta, pair.n_prime
    ) * g2
    return upper - lower


def refine_resonance_two_level(
    params: OscillatorParams, pair: ResonantPair, g: float, xtol: float = 1e-12
) -> float:
    """Detuning at which the second-order energies of the pair coincide.

    The bracket Δ_res⁽⁰⁾ ± 0.2α is scanned for sign changes of the
    mismatch; poles of the second-order terms are skipped and the root
    nearest to the perturbative estimate is polished with Brent's method.
    """
    d0 = resonant_detuning_bare(params, pair)
    guess = resonant_detuning_perturbative(params, pair, g)

    def mismatch(delta):
        try:
            return _two_level_mismatch(params, pair, g, delta)
        except DegenerateLevels:
            return np.nan

    scale = np.finfo(float).eps * 64 * max(1.0, abs(quasienergy_bare(params, d0, pair.n)))
    if abs(mismatch(d0)) <= scale and correction_difference(params, d0, pair) == 0.0:
        return d0

    grid = np.linspace(d0 - BRACKET_HALF_WIDTH, d0 + BRACKET_HALF_WIDTH, 801)
    grid = np.union1d(grid, [guess])
    values = np.array([mismatch(x) for x in grid])
    candidates = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if not (np.isfinite(fa) and np.isfinite(fb)):
            continue
        if fa == 0.0:
            candidates.append(a)
            continue
        if fa * fb < 0:
            root = brentq(mismatch, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps)
            # a pole masquerades as a sign change with a huge residual
            if abs(mismatch(root)) < 1e-6:
                candidates.append(root)
    if not candidates:
        raise NoRoot(f"no resonance of pair {pair} within {d0} ± {BRACKET_HALF_WIDTH}")
    return min(candidates, key=lambda r: abs(r - guess))


def hamiltonian_matrix(params: OscillatorParams, g: float, delta: float, dim: int) -> np.ndarray:
    """Real symmetric matrix of the rotating-frame Hamiltonian on ``dim`` Fock states."""
    n = np.arange(dim, dtype=float)
    h = np.diag(quasienergy_bare(params, delta, n))
    off = g * np.sqrt(n[1:])
    idx = np.arange(dim - 1)
    h[idx, idx + 1] = off
    h[idx + 1, idx] = off
    return h


def _resonant_subspace(vecs: np.ndarray, pair: ResonantPair) -> np.ndarray:
    weight = vecs[pair.n_prime] ** 2 + vecs[pair.n] ** 2
    return np.sort(np.argsort(weight)[-2:])


def dressed_pair_states(
    params: OscillatorParams, g: float, delta: float, pair: ResonantPair, dim: int
) -> tuple[np.ndarray, np.ndarray]:
    """Dressed counterparts of Fock |n'⟩ and |n⟩ at fixed drive.

    The two eigenvectors with the largest weight on |n'⟩, |n⟩ span the
    resonant subspace. Inside it, the lower-level state is the normalised
    projection of Fock |n'⟩ and the upper-level state its orthogonal
    complement, oriented along Fock |n⟩.
    """
    _, vecs = np.linalg.eigh(hamiltonian_matrix(params, g, delta, dim))
    basis = vecs[:, _resonant_subspace(vecs, pair)]
    lower = basis @ basis[pair.n_prime]
    lower /= np.linalg.norm(lower)
    upper = basis @ basis[pair.n]
    upper -= lower * (lower @ upper)
    upper /= np.linalg.norm(upper)
    return lower, upper


def resonance_gap(params: OscillatorParams, g: float, delta: float, pair: ResonantPair, dim: int) -> float:
    """Splitting of the two eigenvalues belonging to the resonant subspace."""
    vals, vecs = np.linalg.eigh(hamiltonian_matrix(params, g, delta, dim))
    i, j = _resonant_subspace(vecs, pair)
    return abs(vals[j] - vals[i])


def quasienergy_curves(
    params: OscillatorParams,
    delta: float,
    g_grid: Sequence[float],
    cutoff: int = 11,
    levels: Sequence[int] | None = None,
) -> QuasienergyCurve:
    """Diagonalise along ``g_grid`` and continue each level by maximum overlap.

    Levels are labelled by the Fock state they start from at g = 0. The
    cutoff guard applies to ``levels`` (default: every level at least
    four below the cutoff, matching the rule cutoff ≥ n + 4).
    """
    g_grid = np.asarray(g_grid, dtype=float)
    if g_grid.size == 0 or g_grid[0] != 0 or np.any(np.diff(g_grid) <= 0):
        raise ValueError("g_grid must be ascending and start at 0")
    dim = cutoff + 1
    if levels is None:
        levels = range(max(cutoff - 3, 1))
    labels = np.array(sorted(levels))

    n_g = g_grid.size
    energies = np.empty((dim, n_g))
    weights = np.empty((dim, n_g))
    vectors = np.empty((n_g, dim, dim))
    prev = np.eye(dim)
    prev_vals = quasienergy_bare(params, delta, np.arange(dim, dtype=float))
    for i, g in enumerate(g_grid):
        vals, vecs = np.linalg.eigh(hamiltonian_matrix(params, g, delta, dim))
        overlap = np.abs(prev.T @ vecs)
        # proximity term only separates overlap ties
        cost = -overlap + 1e-9 * np.abs(prev_vals[:, None] - vals[None, :])
        rows, cols = linear_sum_assignment(cost)
        order = cols[np.argsort(rows)]
        vecs = vecs[:, order]
        vals = vals[order]
        # keep a continuous sign convention
        signs = np.sign(np.sum(prev * vecs, axis=0))
        signs[signs == 0] = 1.0
        vecs = vecs * signs
        energies[:, i] = vals
        weights[:, i] = np.max(vecs**2, axis=0)
        vectors[i] = vecs
        prev, prev_vals = vecs, vals

    top = np.sum(vectors[:, -2:, :] ** 2, axis=1)  # (n_g, dim)
    leaked = top[:, labels].max()
    if leaked > 1e-6:
        raise CutoffTooSmall(f"tracked levels carry weight {leaked:.2e} on the top two Fock states")
    return QuasienergyCurve(
        g_grid=g_grid,
        labels=labels,
        levels=energies[labels],
        overlaps=weights[labels],
        vectors=vectors[:, :, labels],
    )


def _transfer_profile(
    params: OscillatorParams, g: float, delta: float, pair: ResonantPair, dim: int, horizon: float, n_t: int
) -> float:
    vals, vecs = np.linalg.eigh(hamiltonian_matrix(params, g, delta, dim))
    c = vecs[pair.n_prime]
    t = np.linspace(0.0, horizon, n_t)
    amp = np.exp(-1j * np.outer(t, vals)) @ (c * c)
    return 1.0 - float(np.min(np.abs(amp) ** 2))


def peak_transfer(
    params: OscillatorParams,
    g: float,
    delta: float,
    pair: ResonantPair,
    cutoff: int = 11,
    periods: float = 2.0,
    samples_per_period: int = 4000,
) -> float:
    """1 - min_t P_{n'}(t) for the noise-free full model started in Fock |n'⟩."""
    omega = abs(rabi_frequency(params, delta, g, pair))
    period = np.pi / omega
    n_t = int(periods * samples_per_period) + 1
    return _transfer_profile(params, g, delta, pair, cutoff + 1, periods * period, n_t)


def _golden_section_max(f, a: float, b: float, tol: float) -> float:
    ratio = (math.sqrt(5) - 1) / 2
    c = b - ratio * (b - a)
    d = a + ratio * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - ratio * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + ratio * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def refine_resonance_full(
    params: OscillatorParams,
    pair: ResonantPair,
    g: float,
    cutoff: int = 11,
    tol: float = 1e-6,
) -> float:
    """Detuning of maximal noise-free population transfer in the full model.

    The avoided crossing of the resonant dressed pair is located first
    (its position is the centre of the transfer peak, whose width in Δ is
    only ~2ω^R/(n-n')); golden-section search on the peak transfer then
    runs inside a few widths of it.
    """
    dim = cutoff + 1
    d0 = resonant_detuning_bare(params, pair)
    lo, hi = d0 - BRACKET_HALF_WIDTH, d0 + BRACKET_HALF_WIDTH
    try:
        start = refine_resonance_two_level(params, pair, g)
    except NoRoot:
        start = resonant_detuning_perturbative(params, pair, g)
    window = min(0.01, BRACKET_HALF_WIDTH)
    a, b = max(lo, start - window), min(hi, start + window)
    res = minimize_scalar(
        lambda x: resonance_gap(params, g, x, pair, dim), bounds=(a, b), method="bounded",
        options={"xatol": 1e-11},
    )
    centre = float(res.x)
    omega = 0.5 * resonance_gap(params, g, centre, pair, dim)
    if omega <= 0:
        raise NoTransfer(f"vanishing splitting for pair {pair} at g={g}")
    horizon = 2 * np.pi / omega  # two inversion periods
    width = 2 * omega / pair.order

    def objective(x):
        return _transfer_profile(params, g, x, pair, dim, horizon, 8001)

    a, b = max(lo, centre - 3 * width), min(hi, centre + 3 * width)
    best = _golden_section_max(objective, a, b, tol)
    if objective(best) < 0.5:
        raise NoTransfer(f"peak transfer below 0.5 for pair {pair} at g={g}")
    return best
