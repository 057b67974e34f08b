"""Schrödinger propagation of the full rotating-frame model on a truncated Fock space.

Each step holds the Hamiltonian fixed and applies its exact exponential
through an eigendecomposition, so the scheme is unitary to machine
precision and the step is set by the noise, not by the spectrum. Drive
noise between grid samples is either interpolated linearly (default,
resolved with substeps of at most ``max_substep``) or held constant.

All routines accept a batch of noise realisations (leading axis) and
propagate them together.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _stepping
from .errors import CutoffLeak, NormDrift
from .spectrum import OscillatorParams, ResonantPair, dressed_pair_states, hamiltonian_matrix

NORM_TOL = 1e-6
LEAK_TOL = 1e-4


@dataclass(frozen=True)
class FockSpace:
    cutoff: int = 11

    def __post_init__(self):
        if self.cutoff < 2:
            raise ValueError("cutoff must be >= 2")

    @property
    def dim(self) -> int:
        return self.cutoff + 1

    def fock_state(self, k: int) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=complex)
        psi[k] = 1.0
        return psi


@dataclass
class DriveSchedule:
    """Mean drive plus optional noise samples on the grid t_k = k dt, k = 0..n_steps.

    Paths may be 1-D (one realisation) or stacked with shape (batch, n_steps + 1).
    """

    g0: float
    delta0: float
    dt: float
    n_steps: int
    amplitude_path: object = None
    frequency_path: object = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        self.batched = any(np.ndim(getattr(p, "values", p)) == 2
                           for p in (self.amplitude_path, self.frequency_path) if p is not None)
        self.amplitude_path = _stepping.as_batch(self.amplitude_path, self.n_steps)
        self.frequency_path = _stepping.as_batch(self.frequency_path, self.n_steps)
        batches = {p.shape[0] for p in (self.amplitude_path, self.frequency_path) if p is not None}
        if len(batches) > 1:
            raise ValueError("amplitude and frequency paths have different batch sizes")

    @property
    def batch(self) -> int:
        for p in (self.amplitude_path, self.frequency_path):
            if p is not None:
                return p.shape[0]
        return 1

    @property
    def noisy(self) -> bool:
        return any(p is not None and np.any(p != 0) for p in (self.amplitude_path, self.frequency_path))

    @property
    def t_end(self) -> float:
        return self.dt * self.n_steps


@dataclass
class InversionTrace:
    """P_{n'} - P_n sampled at ``times``; leading axes index realisations."""

    times: np.ndarray
    inversion: np.ndarray
    populations: np.ndarray | None = None

    def mean(self) -> np.ndarray:
        inv = np.atleast_2d(self.inversion)
        return inv.mean(axis=0)

    def write_csv(self, path) -> None:
        """Export the first realisation (or the only one)."""
        pops = self.populations
        if pops is not None and pops.ndim == 3:
            pops = pops[0]
        write_trace_csv(path, self.times, np.atleast_2d(self.inversion)[0], pops)


def write_trace_csv(path, times, inversion, populations=None) -> None:
    """CSV with header ``t,inversion[,P0..Pk]`` and 12 significant digits."""
    header = ["t", "inversion"]
    if populations is not None:
        header += [f"P{k}" for k in range(populations.shape[-1])]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i, t in enumerate(times):
            row = [t, inversion[i]]
            if populations is not None:
                row.extend(populations[i])
            fh.write(",".join(f"{float(v):.12g}" for v in row) + "\n")


def build_hamiltonian(params: OscillatorParams, g: float, delta: float, space: FockSpace) -> np.ndarray:
    """Matrix of -Δ a†a + (α/2)(a†a)² + κ(a†a)³ + g(a + a†) on the truncated space."""
    return hamiltonian_matrix(params, g, delta, space.dim)


def _projectors(params, schedule, pair, space, basis):
    if basis == "fock":
        return space.fock_state(pair.n_prime).real, space.fock_state(pair.n).real
    if basis == "dressed":
        return dressed_pair_states(params, schedule.g0, schedule.delta0, pair, space.dim)
    raise ValueError(f"basis must be 'dressed' or 'fock', got {basis!r}")


def _check_guards(psi: np.ndarray, when: float) -> None:
    norm2 = np.sum(np.abs(psi) ** 2, axis=-1)
    drift = np.max(np.abs(np.sqrt(norm2) - 1.0))
    if drift > NORM_TOL:
        raise NormDrift(f"norm drift {drift:.2e} at t={when:g}")
    top = np.max(np.sum(np.abs(psi[..., -2:]) ** 2, axis=-1))
    if top > LEAK_TOL:
        raise CutoffLeak(f"population {top:.2e} on the top two Fock levels at t={when:g}")


def propagate(
    schedule: DriveSchedule,
    params: OscillatorParams,
    space: FockSpace,
    psi0: np.ndarray,
    pair: ResonantPair,
    *,
    hold: str = "linear",
    max_substep: float = 1.0,
    stride: int | None = None,
    basis: str = "dressed",
    record_populations: bool = False,
) -> InversionTrace:
    """Propagate ``psi0`` under the noisy drive and record the inversion.

    ``basis='dressed'`` measures P_{n'} and P_n on the dressed resonant
    pair of the mean drive (g0, Δ0); ``basis='fock'`` uses bare Fock
    states. Populations, when recorded, are always Fock populations.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-9:
        raise ValueError("psi0 must be normalised")
    if stride is None:
        stride = _stepping.default_stride(schedule.n_steps)
    idx = _stepping.record_indices(schedule.n_steps, stride)
    times = idx * schedule.dt
    lower, upper = _projectors(params, schedule, pair, space, basis)

    if not schedule.noisy:
        vals, vecs = np.linalg.eigh(build_hamiltonian(params, schedule.g0, schedule.delta0, space))
        coeff = vecs.T @ psi0
        psi = (np.exp(-1j * np.outer(times, vals)) * coeff) @ vecs.T  # (n_t, dim)
        psi = np.broadcast_to(psi, (schedule.batch,) + psi.shape)
        _check_guards(psi, schedule.t_end)
        inv = np.abs(psi @ lower) ** 2 - np.abs(psi @ upper) ** 2
        pops = np.abs(psi) ** 2 if record_populations else None
        return _finish(schedule, times, inv, pops)

    batch = schedule.batch
    n_sub = _stepping.substeps(schedule.dt, hold, max_substep)
    h = schedule.dt / n_sub
    levels = np.arange(space.dim, dtype=float)
    d_idx = np.arange(space.dim)
    diag0 = np.diag(build_hamiltonian(params, 0.0, schedule.delta0, space))
    hop = np.sqrt(levels[1:])
    k_idx = np.arange(space.dim - 1)

    psi = np.tile(psi0, (batch, 1))
    inv = np.empty((batch, idx.size))
    pops = np.empty((batch, idx.size, space.dim)) if record_populations else None
    ham = np.zeros((batch, space.dim, space.dim))
    rec = 0

    def record(slot):
        inv[:, slot] = np.abs(psi @ lower) ** 2 - np.abs(psi @ upper) ** 2
        if pops is not None:
            pops[:, slot] = np.abs(psi) ** 2

    record(rec)
    rec += 1
    amp, freq = schedule.amplitude_path, schedule.frequency_path
    for k in range(schedule.n_steps):
        xi1 = _stepping.sample_within_step(amp, k, n_sub, hold)
        xi2 = _stepping.sample_within_step(freq, k, n_sub, hold)
        for s in range(n_sub):
            g = schedule.g0 if xi1[s] is None else schedule.g0 + xi1[s]
            g = np.broadcast_to(g, (batch,))
            ham[:, d_idx, d_idx] = diag0
            if xi2[s] is not None:
                ham[:, d_idx, d_idx] -= xi2[s][:, None] * levels
            off = g[:, None] * hop
            ham[:, k_idx, k_idx + 1] = off
            ham[:, k_idx + 1, k_idx] = off
            vals, vecs = np.linalg.eigh(ham)
            coeff = np.einsum("bji,bj->bi", vecs, psi)
            psi = np.einsum("bij,bj->bi", vecs, np.exp(-1j * h * vals) * coeff)
        _check_guards(psi, (k + 1) * schedule.dt)
        if rec < idx.size and idx[rec] == k + 1:
            record(rec)
            rec += 1
    return _finish(schedule, times, inv, pops)


def _finish(schedule, times, inv, pops):
    if not schedule.batched:
        inv = inv[0]
        pops = None if pops is None else pops[0]
    return InversionTrace(times, inv, pops)
