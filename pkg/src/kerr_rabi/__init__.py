"""Noisy multi-photon Rabi oscillations in a driven Kerr / over-Kerr oscillator."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .spectrum import (  # noqa: E402,F401
    OscillatorParams,
    QuasienergyCurve,
    ResonantPair,
    correction_difference,
    quasienergy_bare,
    quasienergy_curves,
    rabi_frequency,
    refine_resonance_full,
    refine_resonance_two_level,
    resonant_detuning_bare,
    resonant_detuning_perturbative,
    second_order_correction,
)
from .noise import NoiseChannel, NoisePath, Target, sample_path, sample_paths  # noqa: E402,F401
from .dynamics import DriveSchedule, FockSpace, InversionTrace, propagate  # noqa: E402,F401
from .twolevel import (  # noqa: E402,F401
    TwoLevelBlocks,
    build_blocks,
    decay_rate,
    propagate_effective,
    solve_master_equation,
)
from .analysis import (  # noqa: E402,F401
    Regime,
    RegimeReport,
    applicability_min_tau,
    escape_probability,
    overdamp_g_upper_bound,
    overdamped_ratio,
    rabi_period_lower_bound,
)
from .experiment import ExperimentConfig, EnsembleResult, load_config, preset_table1, run_experiment  # noqa: E402,F401
