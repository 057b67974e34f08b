"""Experiment configuration, the table1 benchmark presets and seeded ensemble runs."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _stepping, __version__
from .dynamics import DriveSchedule, FockSpace, propagate
from .errors import ConfigError
from .noise import GENERATOR_NAME, NoiseChannel, Target, sample_paths, white_noise_intensity, write_paths_csv
from .spectrum import (
    OscillatorParams,
    ResonantPair,
    rabi_frequency,
    refine_resonance_full,
    refine_resonance_two_level,
    resonant_detuning_bare,
)
from .twolevel import (
    MODES,
    analytic_kerr_correlated,
    analytic_overkerr,
    build_blocks,
    decay_rate,
    propagate_effective,
    solve_master_equation,
)

MODELS = ("full", "effective", "master", "analytic")
STOCHASTIC = ("full", "effective")
AUTO_RESONANCE = ("bare", "two_level", "full")
BASES = ("dressed", "fock")
MIN_OUTPUT_POINTS = 2000
THREADS_ENV = "KERR_RABI_THREADS"

# (n', n, κ/α, g/α, ατ, Δ_full/α, Δ_2lvl/α)
TABLE1 = (
    (0, 3, 0.0, 0.034966, 2000.0, 1.5, 1.5),
    (0, 3, -0.025, 0.029492, 2000.0, 1.274905, 1.274905),
    (0, 4, 0.0, 0.099034, 2000.0, 2.0, 2.0),
    (0, 4, -0.025, 0.075692, 2000.0, 1.599393, 1.599395),
    (0, 5, 0.0, 0.202931, 1000.0, 2.5, 2.5),
    (0, 5, -0.025, 0.138884, 100.0, 1.872625, 1.872634),
    (0, 5, 0.025, 0.261639, 1000.0, 3.125676, 3.125674),
)
TABLE1_ETA = 0.1


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one ensemble run.

    ``delta0`` drives the full model; ``delta0_effective`` (if given) is used
    by the effective, master-equation and analytic models instead, which lets
    each model sit on its own resonance. ``auto_resonance`` overrides both.
    ``dt = None`` selects the automatic step.
    """

    oscillator: OscillatorParams
    pair: ResonantPair
    g0: float
    t_end: float
    delta0: float | None = None
    delta0_effective: float | None = None
    auto_resonance: str | None = None
    noise: tuple[NoiseChannel, ...] = ()
    cutoff: int = 11
    dt: float | None = None
    realizations: int = 1000
    master_seed: int = 42
    models: tuple[str, ...] = ("effective", "master", "analytic")
    effective_mode: str = "full_effective"
    hold: str = "linear"
    max_substep: float = 1.0
    basis: str = "dressed"
    chunk_size: int = 100
    output_dir: str = "."

    def __post_init__(self):
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if not self.t_end > 0:
            raise ConfigError("t_end must be > 0")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError("dt must be > 0 or 'auto'")
        if self.cutoff <= self.pair.n + 1:
            raise ConfigError(f"cutoff {self.cutoff} too small for level {self.pair.n}")
        targets = [c.target for c in self.noise]
        if len(set(targets)) != len(targets):
            raise ConfigError("at most one noise channel per target")
        if not self.models or any(m not in MODELS for m in self.models):
            raise ConfigError(f"models must be a non-empty subset of {MODELS}, got {self.models}")
        if len(set(self.models)) != len(self.models):
            raise ConfigError("models listed twice")
        if self.auto_resonance is not None and self.auto_resonance not in AUTO_RESONANCE:
            raise ConfigError(f"auto_resonance must be one of {AUTO_RESONANCE}")
        if self.auto_resonance is None and self.delta0 is None:
            raise ConfigError("either delta0 or auto_resonance is required")
        if self.effective_mode not in MODES:
            raise ConfigError(f"effective_mode must be one of {MODES}")
        if self.hold not in _stepping.HOLDS:
            raise ConfigError(f"hold must be one of {_stepping.HOLDS}")
        if self.basis not in BASES:
            raise ConfigError(f"basis must be one of {BASES}")
        if not self.max_substep > 0:
            raise ConfigError("max_substep must be > 0")
        if self.chunk_size < 1:
            raise ConfigError("chunk_size must be >= 1")

    def channel(self, target: Target) -> NoiseChannel | None:
        for c in self.noise:
            if c.target is target and c.enabled:
                return c
        return None

    @property
    def noisy(self) -> bool:
        return any(c.enabled for c in self.noise)


@dataclass(frozen=True)
class Resolved:
    """Quantities derived from a config before any model runs."""

    delta_full: float
    delta_eff: float
    dt: float
    n_steps: int
    stride: int

    @property
    def times(self) -> np.ndarray:
        return _stepping.record_indices(self.n_steps, self.stride) * self.dt


@dataclass
class EnsembleResult:
    times: np.ndarray
    mean: dict[str, np.ndarray]
    stderr: dict[str, np.ndarray]
    metadata: dict[str, str] = field(default_factory=dict)

    def columns(self) -> list[tuple[str, np.ndarray]]:
        cols = [("t", self.times)]
        if "full" in self.mean:
            cols += [("mean_full", self.mean["full"]), ("se_full", self.stderr["full"])]
        if "effective" in self.mean:
            cols += [("mean_eff", self.mean["effective"]), ("se_eff", self.stderr["effective"])]
        if "master" in self.mean:
            cols.append(("mean_master", self.mean["master"]))
        if "analytic" in self.mean:
            cols.append(("mean_analytic", self.mean["analytic"]))
        return cols

    def write_csv(self, path) -> None:
        cols = self.columns()
        write_csv(path, [name for name, _ in cols], zip(*(values for _, values in cols)))


def write_csv(path, header, rows) -> None:
    """Header plus rows; floats in shortest round-trip form, ``\\n`` endings."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# ---------------------------------------------------------------- config I/O


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


_SCALAR_KEYS = {
    "kappa": float,
    "alpha": float,
    "n": int,
    "n_prime": int,
    "g0": float,
    "t_end": float,
    "delta0": float,
    "delta0_effective": float,
    "auto_resonance": str,
    "cutoff": int,
    "dt": float,
    "realizations": int,
    "master_seed": int,
    "models": str,
    "effective_mode": str,
    "hold": str,
    "max_substep": float,
    "basis": str,
    "chunk_size": int,
    "output_dir": str,
}
_NOISE_KEYS = {f"noise.{t.value}.{f}" for t in Target for f in ("sigma", "tau")}


def _convert(key: str, value: str, kind):
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r} as {kind.__name__}") from None


def config_from_mapping(mapping: dict[str, str]) -> ExperimentConfig:
    """Build a config from parsed strings. Keys under ``meta.`` are informational and ignored."""
    values: dict = {}
    noise: dict[Target, dict[str, float]] = {}
    for key, raw in mapping.items():
        if key.startswith("meta."):
            continue
        if key in _NOISE_KEYS:
            _, target, fname = key.split(".")
            noise.setdefault(Target(target), {})[fname] = _convert(key, raw, float)
            continue
        if key not in _SCALAR_KEYS:
            raise ConfigError(f"unknown key {key!r}")
        kind = _SCALAR_KEYS[key]
        if raw.lower() in ("none", "auto", "") and key in ("delta0", "delta0_effective", "dt", "auto_resonance"):
            values[key] = None
            continue
        values[key] = _convert(key, raw, kind)
    missing = [k for k in ("n", "g0", "t_end") if k not in values]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    channels = []
    for target, fields_ in sorted(noise.items(), key=lambda kv: kv[0].index):
        if set(fields_) != {"sigma", "tau"}:
            raise ConfigError(f"noise.{target.value} needs both sigma and tau")
        try:
            channels.append(NoiseChannel(fields_["sigma"], fields_["tau"], target))
        except ValueError as exc:
            raise ConfigError(f"noise.{target.value}: {exc}") from None
    try:
        oscillator = OscillatorParams(values.pop("kappa", 0.0), values.pop("alpha", 1.0))
        pair = ResonantPair(values.pop("n"), values.pop("n_prime", 0))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if "models" in values:
        values["models"] = tuple(m.strip() for m in values["models"].split(",") if m.strip())
    return ExperimentConfig(oscillator=oscillator, pair=pair, noise=tuple(channels), **values)


def load_config(path) -> ExperimentConfig:
    return config_from_mapping(parse_config_text(Path(path).read_text()))


def config_to_mapping(config: ExperimentConfig) -> dict[str, str]:
    """Inverse of :func:`config_from_mapping` (floats use repr, so it round-trips exactly)."""

    def opt(v):
        return "none" if v is None else _fmt(v)

    m = {
        "kappa": _fmt(config.oscillator.kappa),
        "alpha": _fmt(config.oscillator.alpha),
        "n": str(config.pair.n),
        "n_prime": str(config.pair.n_prime),
        "g0": _fmt(config.g0),
        "delta0": opt(config.delta0),
        "delta0_effective": opt(config.delta0_effective),
        "auto_resonance": opt(config.auto_resonance),
    }
    for c in config.noise:
        m[f"noise.{c.target.value}.sigma"] = _fmt(c.sigma)
        m[f"noise.{c.target.value}.tau"] = _fmt(c.tau)
    m.update(
        cutoff=str(config.cutoff),
        t_end=_fmt(config.t_end),
        dt="auto" if config.dt is None else _fmt(config.dt),
        realizations=str(config.realizations),
        master_seed=str(config.master_seed),
        models=", ".join(config.models),
        effective_mode=config.effective_mode,
        hold=config.hold,
        max_substep=_fmt(config.max_substep),
        basis=config.basis,
        chunk_size=str(config.chunk_size),
        output_dir=config.output_dir,
    )
    return m


def format_mapping(mapping: dict[str, str]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in mapping.items())


# ------------------------------------------------------------------- presets


def preset_table1(
    row: int,
    models: tuple[str, ...] = ("effective", "master", "analytic"),
    realizations: int = 1000,
    master_seed: int = 42,
    output_dir: str = ".",
) -> ExperimentConfig:
    """One table1 benchmark row as a config: η = 0.1 amplitude noise, cutoff 11, two inversion periods."""
    if not 1 <= row <= len(TABLE1):
        raise ConfigError(f"row must be in 1..{len(TABLE1)}, got {row}")
    n_prime, n, kappa, g, tau, d_full, d_eff = TABLE1[row - 1]
    params, pair = OscillatorParams(kappa), ResonantPair(n, n_prime)
    omega = abs(rabi_frequency(params, d_full, g, pair))
    return ExperimentConfig(
        oscillator=params,
        pair=pair,
        g0=g,
        t_end=2 * math.pi / omega,
        delta0=d_full,
        delta0_effective=d_eff,
        noise=(NoiseChannel(round(TABLE1_ETA * g, 12), tau, Target.AMPLITUDE),),
        realizations=realizations,
        master_seed=master_seed,
        models=tuple(models),
        output_dir=output_dir,
    )


# -------------------------------------------------------------------- runner


def resolve(config: ExperimentConfig) -> Resolved:
    """Resonances, step and recording stride."""
    params, pair, g0 = config.oscillator, config.pair, config.g0
    if config.auto_resonance == "bare":
        d_full = d_eff = resonant_detuning_bare(params, pair)
    elif config.auto_resonance == "two_level":
        d_full = d_eff = refine_resonance_two_level(params, pair, g0)
    elif config.auto_resonance == "full":
        d_full = d_eff = refine_resonance_full(params, pair, g0, config.cutoff)
    else:
        d_full = config.delta0
        d_eff = config.delta0 if config.delta0_effective is None else config.delta0_effective

    if config.dt is not None:
        n_steps = max(1, math.ceil(config.t_end / config.dt - 1e-9))
    elif config.noisy:
        tau = min(c.tau for c in config.noise if c.enabled)
        n_steps = max(MIN_OUTPUT_POINTS, math.ceil(config.t_end / (tau / 20) - 1e-9))
    else:
        n_steps = MIN_OUTPUT_POINTS
    dt = config.t_end / n_steps
    return Resolved(float(d_full), float(d_eff), dt, n_steps, _stepping.default_stride(n_steps))


def worker_count(requested: int | None = None) -> int:
    """Requested (default: CPU count) workers, capped by ``KERR_RABI_THREADS``."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, n)


def _noise_batch(config: ExperimentConfig, res: Resolved, trajectories) -> dict[Target, np.ndarray]:
    out = {}
    for target in Target:
        channel = config.channel(target)
        if channel is not None:
            out[target] = sample_paths(channel, res.dt, res.n_steps + 1, config.master_seed, trajectories)
    return out


def simulate_chunk(config: ExperimentConfig, res: Resolved, model: str, start: int, stop: int) -> np.ndarray:
    """Inversion traces of trajectories ``start..stop-1``, shape (stop - start, n_times)."""
    paths = _noise_batch(config, res, range(start, stop))
    delta = res.delta_full if model == "full" else res.delta_eff
    schedule = DriveSchedule(
        config.g0, delta, res.dt, res.n_steps,
        amplitude_path=paths.get(Target.AMPLITUDE), frequency_path=paths.get(Target.FREQUENCY),
    )
    if model == "full":
        space = FockSpace(config.cutoff)
        trace = propagate(
            schedule, config.oscillator, space, space.fock_state(config.pair.n_prime), config.pair,
            hold=config.hold, max_substep=config.max_substep, stride=res.stride, basis=config.basis,
        )
    else:
        trace = propagate_effective(
            schedule, config.oscillator, config.pair, mode=config.effective_mode,
            hold=config.hold, max_substep=config.max_substep, stride=res.stride,
        )
    return np.atleast_2d(trace.inversion)


def _ensemble(config: ExperimentConfig, res: Resolved, model: str, workers: int):
    n_times = res.times.size
    if not config.noisy:
        # every realisation is the same deterministic trace
        trace = simulate_chunk(config, res, model, 0, 1)[0]
        return trace, np.zeros(n_times)
    n = config.realizations
    bounds = [(s, min(s + config.chunk_size, n)) for s in range(0, n, config.chunk_size)]
    if workers > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(bounds))) as pool:
            futures = [pool.submit(simulate_chunk, config, res, model, a, b) for a, b in bounds]
            chunks = [f.result() for f in futures]
    else:
        chunks = [simulate_chunk(config, res, model, a, b) for a, b in bounds]
    traces = np.concatenate(chunks, axis=0)
    if traces.shape != (n, n_times):
        raise RuntimeError(f"ensemble has shape {traces.shape}, expected {(n, n_times)}")
    mean = traces.mean(axis=0)
    se = traces.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(n_times)
    return mean, se


def analytic_trace(config: ExperimentConfig, res: Resolved, times: np.ndarray) -> np.ndarray:
    """Closed-form noise-averaged inversion for the effective model.

    Kerr oscillators with amplitude noise only use the exact
    correlated-noise expression; everything else uses the white-noise
    damped-oscillator form with Γ from the correction difference.
    """
    params, pair, g0 = config.oscillator, config.pair, config.g0
    amp, freq = config.channel(Target.AMPLITUDE), config.channel(Target.FREQUENCY)
    blocks = build_blocks(params, pair, g0, res.delta_eff)
    if params.kappa == 0 and freq is None:
        if amp is None:
            return np.cos(2 * blocks.h12 * times)
        return analytic_kerr_correlated(blocks.v12, blocks.h12, amp, times)
    q1 = 0.0 if amp is None else white_noise_intensity(amp)
    q2 = 0.0 if freq is None else white_noise_intensity(freq)
    gamma, _ = decay_rate(params, pair, g0, res.delta_eff, q1, q2)
    return analytic_overkerr(gamma, abs(blocks.h12), times)


def master_trace(config: ExperimentConfig, res: Resolved, times: np.ndarray) -> np.ndarray:
    amp, freq = config.channel(Target.AMPLITUDE), config.channel(Target.FREQUENCY)
    q1 = 0.0 if amp is None else white_noise_intensity(amp)
    q2 = 0.0 if freq is None else white_noise_intensity(freq)
    blocks = build_blocks(config.oscillator, config.pair, config.g0, res.delta_eff)
    return solve_master_equation(blocks, q1, q2, times).inversion


def manifest_mapping(config: ExperimentConfig, res: Resolved, workers: int) -> dict[str, str]:
    """Config keys with resonances pinned to their resolved values, plus ``meta.*`` records."""
    pinned = replace(config, auto_resonance=None, delta0=res.delta_full, delta0_effective=res.delta_eff)
    m = config_to_mapping(pinned)
    m.update({
        "meta.version": __version__,
        "meta.numpy": np.__version__,
        "meta.generator": GENERATOR_NAME,
        "meta.seed_rule": f"trajectory k, channel c -> SeedSequence({config.master_seed}, spawn_key=(k, c)); "
                          "c = 1 amplitude, 2 frequency",
        "meta.trajectories": f"0..{config.realizations - 1}" if config.noisy else "none (noise-free)",
        "meta.requested_auto_resonance": "none" if config.auto_resonance is None else config.auto_resonance,
        "meta.delta_full": _fmt(res.delta_full),
        "meta.delta_eff": _fmt(res.delta_eff),
        "meta.dt": _fmt(res.dt),
        "meta.n_steps": str(res.n_steps),
        "meta.substeps": str(_stepping.substeps(res.dt, config.hold, config.max_substep)),
        "meta.stride": str(res.stride),
        "meta.output_points": str(res.times.size),
        "meta.workers": str(workers),
    })
    return m


def run_experiment(
    config: ExperimentConfig, workers: int | None = None, write: bool = True, dump_noise: bool = False
) -> EnsembleResult:
    """Run every requested model; write ``result.csv`` and ``manifest.cfg`` to ``output_dir``.

    Results depend only on the config: trajectories are chunked by
    ``chunk_size`` whatever the worker count and reduced in index order.
    """
    workers = worker_count(workers)
    res = resolve(config)
    times = res.times
    mean, stderr = {}, {}
    for model in MODELS:
        if model not in config.models:
            continue
        if model in STOCHASTIC:
            mean[model], stderr[model] = _ensemble(config, res, model, workers)
        elif model == "master":
            mean[model] = master_trace(config, res, times)
        else:
            mean[model] = analytic_trace(config, res, times)
    result = EnsembleResult(times, mean, stderr, manifest_mapping(config, res, workers))
    if write:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.write_csv(out / "result.csv")
        meta = dict(result.metadata)
        meta.pop("meta.workers")  # keep the manifest independent of parallelism
        (out / "manifest.cfg").write_text(format_mapping(meta))
        if dump_noise and config.noisy:
            paths = _noise_batch(config, res, [0])
            xi1, xi2 = (paths.get(t) for t in (Target.AMPLITUDE, Target.FREQUENCY))
            write_paths_csv(
                out / "noise_trajectory0.csv", res.dt,
                None if xi1 is None else xi1[0], None if xi2 is None else xi2[0],
            )
    return result
