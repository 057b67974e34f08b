"""Command-line entry point: ``kerr-rabi <subcommand>``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical guard
tripped, 1 any other package error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import scans
from .errors import ConfigError, KerrRabiError, NumericalGuardError
from .experiment import (
    MODELS,
    TABLE1,
    config_from_mapping,
    config_to_mapping,
    load_config,
    preset_table1,
    run_experiment,
    write_csv,
)
from .noise import NoiseChannel, Target, derive_seed, sample_path, write_paths_csv
from .spectrum import OscillatorParams, ResonantPair

log = logging.getLogger("kerr_rabi")


def _pairs(text: str) -> list[ResonantPair]:
    """``"3,4,5"`` or ``"5:1,4"`` -> pairs (n' defaults to 0)."""
    out = []
    for item in text.split(","):
        n, _, m = item.strip().partition(":")
        out.append(ResonantPair(int(n), int(m or 0)))
    return out


def _models(text: str) -> tuple[str, ...]:
    models = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in models if m not in MODELS]
    if bad:
        raise ConfigError(f"unknown model(s) {bad}; choose from {MODELS}")
    return models


def _apply_overrides(config, overrides: list[str]):
    if not overrides:
        return config
    mapping = config_to_mapping(config)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        mapping[key.strip()] = value.strip()
    return config_from_mapping(mapping)


def _run(config, args) -> int:
    if args.output_dir:
        config = replace(config, output_dir=args.output_dir)
    config = _apply_overrides(config, args.set)
    start = time.perf_counter()
    result = run_experiment(config, workers=args.threads, dump_noise=args.dump_noise)
    log.info("wrote %s/result.csv (%d points, models %s) in %.1f s",
             config.output_dir, result.times.size, ",".join(result.mean), time.perf_counter() - start)
    return 0


def cmd_run(args) -> int:
    return _run(load_config(args.config), args)


def cmd_preset(args) -> int:
    config = preset_table1(
        args.row,
        models=_models(args.models),
        realizations=args.realizations,
        master_seed=args.seed,
        output_dir=args.output_dir or f"table1_row{args.row}",
    )
    return _run(config, args)


def cmd_scan_resonance(args) -> int:
    params = OscillatorParams(args.kappa)
    if args.mode == "parabola":
        header, rows = scans.bare_parabola(params, args.delta, args.n_max)
    elif args.mode == "curves":
        grid = np.linspace(args.g_min, args.g_max, args.g_points)
        levels = [int(k) for k in args.levels.split(",")]
        header, rows = scans.quasienergy_scan(params, args.delta, grid, args.cutoff, levels)
    else:
        kappas = scans.kappa_grid(args.kappa_min, args.kappa_max, args.points)
        header, rows = scans.correction_scan(kappas, _pairs(args.pairs))
    write_csv(args.output, header, rows)
    return 0


def cmd_scan_ttilde(args) -> int:
    kappas = scans.kappa_grid(args.kappa_min, args.kappa_max, args.points)
    header, rows = scans.ttilde_scan(kappas, _pairs(args.pairs), args.eta)
    write_csv(args.output, header, rows)
    return 0


def cmd_audit(args) -> int:
    header, rows = scans.audit_table1(args.eta)
    write_csv(args.output, header, rows)
    for row in rows:
        print(f"row {row[0]}: Gamma/(2 omega_R) = {row[3]:.4g} ({row[4]})")
    return 0


def cmd_dump_noise(args) -> int:
    paths = []
    for target, sigma, tau in ((Target.AMPLITUDE, args.sigma1, args.tau1), (Target.FREQUENCY, args.sigma2, args.tau2)):
        if sigma > 0:
            seed = derive_seed(args.seed, args.trajectory, target.index)
            paths.append(sample_path(NoiseChannel(sigma, tau, target), args.dt, args.samples, seed).values)
        else:
            paths.append(None)
    if all(p is None for p in paths):
        raise ConfigError("both channels are disabled")
    write_paths_csv(args.output, args.dt, *paths)
    return 0


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output-dir", help="directory for result.csv and manifest.cfg")
    p.add_argument("--threads", type=int, help="worker processes (capped by KERR_RABI_THREADS)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--dump-noise", action="store_true", help="also write trajectory 0's noise path as CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kerr-rabi", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a config file")
    p.add_argument("config")
    _add_run_options(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("preset", help="run a shipped preset")
    p.add_argument("table", choices=["table1"])
    p.add_argument("--row", type=int, required=True, choices=range(1, len(TABLE1) + 1))
    p.add_argument("--models", default="effective,master,analytic",
                   help="comma-separated subset of full,effective,master,analytic")
    p.add_argument("--realizations", type=int, default=1000)
    p.add_argument("--seed", type=int, default=42)
    _add_run_options(p)
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("scan-resonance", help="quasienergy parabola, curves vs g, or correction difference vs kappa")
    p.add_argument("--mode", choices=["parabola", "curves", "corrections"], default="parabola")
    p.add_argument("--kappa", type=float, default=-0.025)
    p.add_argument("--delta", type=float, default=1.875)
    p.add_argument("--n-max", type=int, default=8)
    p.add_argument("--g-min", type=float, default=0.0)
    p.add_argument("--g-max", type=float, default=0.2)
    p.add_argument("--g-points", type=int, default=301)
    p.add_argument("--cutoff", type=int, default=11)
    p.add_argument("--levels", default="0,1,2,3,4,5",
                   help="comma-separated Fock labels to track")
    p.add_argument("--kappa-min", type=float, default=-0.1)
    p.add_argument("--kappa-max", type=float, default=-0.001)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--pairs", default="3,4,5")
    p.add_argument("--output", default="scan_resonance.csv")
    p.set_defaults(func=cmd_scan_resonance)

    p = sub.add_parser("scan-ttilde", help="Rabi-period lower bound versus kappa")
    p.add_argument("--kappa-min", type=float, default=-0.1)
    p.add_argument("--kappa-max", type=float, default=-0.001)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--pairs", default="3,4,5")
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--output", default="scan_ttilde.csv")
    p.set_defaults(func=cmd_scan_ttilde)

    p = sub.add_parser("audit-table1", help="recompute the damping-ratio column")
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--output", default="audit_table1.csv")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("dump-noise", help="write one seeded noise realisation as t,xi1,xi2")
    p.add_argument("--sigma1", type=float, default=0.0)
    p.add_argument("--tau1", type=float, default=100.0)
    p.add_argument("--sigma2", type=float, default=0.0)
    p.add_argument("--tau2", type=float, default=100.0)
    p.add_argument("--dt", type=float, default=5.0)
    p.add_argument("--samples", type=int, default=10001)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--trajectory", type=int, default=0)
    p.add_argument("--output", default="noise.csv")
    p.set_defaults(func=cmd_dump_noise)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalGuardError as exc:
        print(f"numerical guard tripped: {exc}", file=sys.stderr)
        return 3
    except KerrRabiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot access file: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
