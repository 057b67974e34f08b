"""Exponentially correlated Gaussian noise (stationary Ornstein-Uhlenbeck paths).

Paths are sampled with the exact one-step transition of the OU process,

    x_{k+1} = x_k e^{-dt/τ} + σ sqrt(1 - e^{-2dt/τ}) ζ_k,

started from the stationary law N(0, σ²), so grid-point statistics are
exact for any step. Random streams come from numpy's PCG64 seeded through
``SeedSequence`` with a (trajectory, channel) spawn key, which makes every
path a pure function of the master seed and its indices.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidStep, PathTooShort

GENERATOR_NAME = "numpy.random.PCG64 via SeedSequence(master, spawn_key=(trajectory, channel)); ziggurat normals"


class Target(str, enum.Enum):
    AMPLITUDE = "amplitude"
    FREQUENCY = "frequency"

    @property
    def index(self) -> int:
        return 1 if self is Target.AMPLITUDE else 2


@dataclass(frozen=True)
class NoiseChannel:
    """One colored-noise source: standard deviation, correlation time, target."""

    sigma: float
    tau: float
    target: Target = Target.AMPLITUDE

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        object.__setattr__(self, "target", Target(self.target))

    @property
    def enabled(self) -> bool:
        return self.sigma > 0


@dataclass(frozen=True)
class NoisePath:
    dt: float
    values: np.ndarray
    seed: object = None

    def __post_init__(self):
        if self.values.ndim != 1 or self.values.size < 1:
            raise ValueError("a noise path needs at least one sample")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("noise path contains non-finite values")

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.values.size)


def derive_seed(master: int, trajectory: int, channel: int) -> np.random.SeedSequence:
    """Counter-based sub-seed for one trajectory and one channel."""
    return np.random.SeedSequence(int(master), spawn_key=(int(trajectory), int(channel)))


def ou_step_coefficients(dt: float, tau: float) -> tuple[float, float]:
    """Decay factor and innovation scale (per unit σ) of the exact OU step."""
    if not dt > 0:
        raise InvalidStep(f"dt must be > 0, got {dt}")
    decay = np.exp(-dt / tau)
    return float(decay), float(np.sqrt(-np.expm1(-2.0 * dt / tau)))


def ou_recursion(first: np.ndarray, innovations: np.ndarray, decay: float, scale: float) -> np.ndarray:
    """Run x_{k+1} = decay x_k + scale ζ_k along the last axis.

    ``first`` has shape ``batch``; ``innovations`` has shape ``batch + (n-1,)``.
    """
    first = np.asarray(first, dtype=float)
    out = np.empty(first.shape + (innovations.shape[-1] + 1,))
    out[..., 0] = first
    if innovations.shape[-1]:
        zi = (decay * first)[..., None]
        out[..., 1:], _ = lfilter([1.0], [1.0, -decay], scale * innovations, axis=-1, zi=zi)
    return out


def sample_path(channel: NoiseChannel, dt: float, n_samples: int, seed) -> NoisePath:
    """Stationary OU path with ``n_samples`` grid values spaced by ``dt``.

    ``seed`` is an integer token or a ``SeedSequence``. A disabled channel
    (σ = 0) yields zeros without consuming randomness.
    """
    decay, scale = ou_step_coefficients(dt, channel.tau)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not channel.enabled:
        return NoisePath(dt, np.zeros(n_samples), seed)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n_samples)
    values = ou_recursion(channel.sigma * z[0], channel.sigma * z[1:], decay, scale)
    return NoisePath(dt, values, seed)


def sample_paths(
    channel: NoiseChannel, dt: float, n_samples: int, master_seed: int, trajectories
) -> np.ndarray:
    """Stack of paths for the given trajectory indices, shape (len(trajectories), n_samples).

    Row i equals ``sample_path(channel, dt, n_samples, derive_seed(master_seed, t_i, channel index))``.
    """
    trajectories = list(trajectories)
    decay, scale = ou_step_coefficients(dt, channel.tau)
    if not channel.enabled:
        return np.zeros((len(trajectories), n_samples))
    z = np.stack(
        [
            np.random.default_rng(derive_seed(master_seed, t, channel.target.index)).standard_normal(n_samples)
            for t in trajectories
        ]
    )
    return ou_recursion(channel.sigma * z[:, 0], channel.sigma * z[:, 1:], decay, scale)


def white_noise_intensity(channel: NoiseChannel) -> float:
    """Q = 2τσ², the delta-correlation strength of the white-noise limit."""
    return 2.0 * channel.tau * channel.sigma**2


def estimate_autocorrelation(path: NoisePath | np.ndarray, max_lag: int) -> np.ndarray:
    """Biased (1/N) sample autocovariance at lags 0..max_lag.

    The path is not demeaned: the process has zero mean by construction.
    """
    x = np.asarray(path.values if isinstance(path, NoisePath) else path, dtype=float)
    n = x.size
    if max_lag < 0 or max_lag >= n / 10:
        raise PathTooShort(f"max_lag {max_lag} requires more than {10 * max_lag} samples, have {n}")
    size = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(x, size)
    acov = np.fft.irfft(spec * np.conj(spec), size)[: max_lag + 1]
    return acov / n


def write_paths_csv(path, dt: float, xi1: np.ndarray | None, xi2: np.ndarray | None) -> None:
    """Debug dump with header ``t,xi1,xi2``; a missing channel is written as zeros."""
    n = len(xi1) if xi1 is not None else len(xi2)
    xi1 = np.zeros(n) if xi1 is None else np.asarray(xi1)
    xi2 = np.zeros(n) if xi2 is None else np.asarray(xi2)
    with open(path, "w", newline="") as fh:
        fh.write("t,xi1,xi2\n")
        for k in range(n):
            fh.write(f"{repr(float(k * dt))},{repr(float(xi1[k]))},{repr(float(xi2[k]))}\n")
