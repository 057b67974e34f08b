import math
from dataclasses import replace

import numpy as np
import pytest

from kerr_rabi.dynamics import DriveSchedule, FockSpace, propagate
from kerr_rabi.errors import ConfigError
from kerr_rabi.experiment import (
    TABLE1,
    ExperimentConfig,
    analytic_trace,
    config_from_mapping,
    config_to_mapping,
    format_mapping,
    load_config,
    parse_config_text,
    preset_table1,
    resolve,
    run_experiment,
    worker_count,
)
from kerr_rabi.noise import NoiseChannel, Target
from kerr_rabi.spectrum import OscillatorParams, ResonantPair, refine_resonance_two_level
from kerr_rabi.twolevel import analytic_kerr_correlated, build_blocks, propagate_effective

SAMPLE = """\
# row 6, shortened
kappa = -0.025
n = 5
g0 = 0.138884          # drive amplitude
delta0 = 1.872625
delta0_effective = 1.872634
noise.amplitude.sigma = 0.0138884
noise.amplitude.tau = 100

t_end = 2000
realizations = 8
chunk_size = 3
models = effective, analytic
"""


def short_row6(**changes):
    config = preset_table1(6, models=("effective", "master", "analytic"), realizations=12)
    return replace(config, t_end=1500.0, chunk_size=5, **changes)


class TestParsing:
    def test_sample(self):
        config = config_from_mapping(parse_config_text(SAMPLE))
        assert config.oscillator.kappa == -0.025
        assert config.pair == ResonantPair(5, 0)
        assert config.noise == (NoiseChannel(0.0138884, 100.0, Target.AMPLITUDE),)
        assert config.models == ("effective", "analytic")
        assert config.dt is None and config.auto_resonance is None

    @pytest.mark.parametrize("text, message", [
        ("n = 5\nn = 6\n", "duplicate"),
        ("n 5\n", "expected"),
        ("n = 5\ng0 = 0.1\nt_end = 1\ndelta0 = 2\nfoo = 1\n", "unknown"),
        ("n = five\n", "cannot parse"),
        ("n = 5\ng0 = 0.1\nt_end = 1\ndelta0 = 2\nnoise.amplitude.sigma = 0.1\n", "sigma and tau"),
        ("n = 5\ng0 = 0.1\n", "missing"),
        ("n = 5\ng0 = 0.1\nt_end = 1\n", "delta0 or auto_resonance"),
        ("n = 5\ng0 = 0.1\nt_end = 1\ndelta0 = 2\nrealizations = 0\n", "realizations"),
        ("n = 5\ng0 = 0.1\nt_end = 1\ndelta0 = 2\nmodels = full, quantum\n", "models"),
        ("n = 5\ng0 = 0.1\nt_end = 1\ndelta0 = 2\ncutoff = 6\n", "cutoff"),
        ("n = 5\ng0 = 0.1\nt_end = -1\ndelta0 = 2\n", "t_end"),
        ("n = 5\ng0 = 0.1\nt_end = 1\ndelta0 = 2\nkappa = 0.5\n", "kappa"),
        ("n = 5\ng0 = 0.1\nt_end = 1\ndelta0 = 2\nnoise.amplitude.sigma = -1\nnoise.amplitude.tau = 1\n", "sigma"),
    ])
    def test_errors(self, text, message):
        with pytest.raises(ConfigError, match=message):
            config_from_mapping(parse_config_text(text))

    def test_one_channel_per_target(self):
        with pytest.raises(ConfigError):
            replace(short_row6(), noise=(NoiseChannel(0.1, 1.0), NoiseChannel(0.2, 1.0)))

    def test_meta_keys_ignored(self):
        text = SAMPLE + "meta.version = 9.9\n"
        assert config_from_mapping(parse_config_text(text)) == config_from_mapping(parse_config_text(SAMPLE))

    @pytest.mark.parametrize("row", range(1, 8))
    def test_round_trip(self, row):
        config = preset_table1(row)
        again = config_from_mapping(parse_config_text(format_mapping(config_to_mapping(config))))
        assert again == config

    def test_round_trip_with_options(self):
        config = replace(short_row6(), dt=2.5, auto_resonance="two_level", hold="constant",
                         noise=(NoiseChannel(0.01, 50.0), NoiseChannel(1e-4, 20.0, Target.FREQUENCY)))
        again = config_from_mapping(parse_config_text(format_mapping(config_to_mapping(config))))
        assert again == config

    def test_load(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text(SAMPLE)
        assert load_config(path).realizations == 8


class TestPresets:
    def test_row5(self):
        c = preset_table1(5)
        assert (c.g0, c.noise[0].tau, c.delta0) == (0.202931, 1000.0, 2.5)

    def test_row7(self):
        c = preset_table1(7)
        assert c.oscillator.kappa == 0.025 and c.delta0 == 3.125676 and c.delta0_effective == 3.125674

    def test_row1(self):
        c = preset_table1(1)
        assert c.oscillator.kappa == 0.0 and c.pair == ResonantPair(3, 0)

    @pytest.mark.parametrize("row", range(1, 8))
    def test_common_protocol(self, row):
        c = preset_table1(row)
        assert c.cutoff == 11 and c.pair.n_prime == 0
        assert c.noise[0].target is Target.AMPLITUDE
        assert c.noise[0].sigma == pytest.approx(0.1 * c.g0, rel=1e-12)
        assert c.t_end == pytest.approx(6e4, rel=0.03)

    def test_bad_row(self):
        with pytest.raises(ConfigError):
            preset_table1(8)

    def test_table_rows(self):
        assert len(TABLE1) == 7


class TestResolve:
    def test_auto_step(self):
        res = resolve(preset_table1(6))
        assert res.dt == pytest.approx(5.0, rel=1e-4)
        assert res.dt <= 5.0
        assert res.times.size >= 2000
        assert res.times[-1] == pytest.approx(preset_table1(6).t_end, rel=1e-14)

    def test_long_tau_keeps_2000_points(self):
        res = resolve(preset_table1(1))
        assert res.n_steps == 2000

    def test_noise_free(self):
        c = replace(short_row6(), noise=())
        assert resolve(c).n_steps == 2000

    def test_explicit_step(self):
        res = resolve(replace(short_row6(), dt=7.0))
        assert res.n_steps == math.ceil(1500 / 7)

    def test_auto_resonance(self):
        c = replace(short_row6(), auto_resonance="bare")
        assert resolve(c).delta_full == resolve(c).delta_eff == 1.875
        c = replace(short_row6(), auto_resonance="two_level")
        assert resolve(c).delta_eff == refine_resonance_two_level(c.oscillator, c.pair, c.g0)

    def test_model_specific_detunings(self):
        res = resolve(short_row6())
        assert (res.delta_full, res.delta_eff) == (1.872625, 1.872634)


def test_worker_cap(monkeypatch):
    monkeypatch.setenv("KERR_RABI_THREADS", "2")
    assert worker_count(8) == 2
    assert worker_count(1) == 1
    monkeypatch.setenv("KERR_RABI_THREADS", "many")
    with pytest.raises(ConfigError):
        worker_count(4)


class TestRun:
    def test_noise_free_single_realisation(self, tmp_path):
        c = replace(short_row6(), noise=(NoiseChannel(0.0, 100.0),), realizations=1,
                    models=("full", "effective"), output_dir=str(tmp_path))
        result = run_experiment(c, workers=1)
        res = resolve(c)
        eff = propagate_effective(DriveSchedule(c.g0, res.delta_eff, res.dt, res.n_steps), c.oscillator, c.pair,
                                  stride=res.stride)
        space = FockSpace(11)
        full = propagate(DriveSchedule(c.g0, res.delta_full, res.dt, res.n_steps), c.oscillator, space,
                         space.fock_state(0), c.pair, stride=res.stride)
        np.testing.assert_array_equal(result.mean["effective"], eff.inversion)
        np.testing.assert_array_equal(result.mean["full"], full.inversion)
        assert not result.stderr["effective"].any() and not result.stderr["full"].any()

    def test_columns_and_format(self, tmp_path):
        c = replace(short_row6(), models=("analytic", "effective"), output_dir=str(tmp_path))
        run_experiment(c, workers=1)
        lines = (tmp_path / "result.csv").read_text().split("\n")
        assert lines[0] == "t,mean_eff,se_eff,mean_analytic"
        assert lines[-1] == ""
        first = lines[1].split(",")
        assert first == ["0.0", "1.0", "0.0", "1.0"]
        assert len(lines) - 2 == resolve(c).times.size

    def test_invariants(self, tmp_path):
        result = run_experiment(replace(short_row6(), output_dir=str(tmp_path)), workers=1)
        for values in result.mean.values():
            assert np.all(np.abs(values) <= 1 + 1e-12)
        assert np.all(result.stderr["effective"] >= 0)

    def test_stderr_scaling(self):
        base = replace(short_row6(), models=("effective",), chunk_size=100)
        small = run_experiment(replace(base, realizations=100), workers=1, write=False)
        large = run_experiment(replace(base, realizations=400), workers=1, write=False)
        ratio = np.median(small.stderr["effective"][1:]) / np.median(large.stderr["effective"][1:])
        assert ratio == pytest.approx(2.0, rel=0.2)

    def test_parallel_determinism(self, tmp_path):
        c = replace(short_row6(), realizations=20)
        run_experiment(replace(c, output_dir=str(tmp_path / "a")), workers=1)
        run_experiment(replace(c, output_dir=str(tmp_path / "b")), workers=3)
        assert (tmp_path / "a" / "result.csv").read_bytes() == (tmp_path / "b" / "result.csv").read_bytes()

    def test_manifest_round_trip(self, tmp_path):
        c = replace(short_row6(), auto_resonance="two_level", output_dir=str(tmp_path / "a"))
        run_experiment(c, workers=1)
        again = load_config(tmp_path / "a" / "manifest.cfg")
        run_experiment(replace(again, output_dir=str(tmp_path / "b")), workers=1)
        assert (tmp_path / "a" / "result.csv").read_bytes() == (tmp_path / "b" / "result.csv").read_bytes()
        manifest = (tmp_path / "a" / "manifest.cfg").read_text()
        for key in ("meta.generator", "meta.seed_rule", "meta.version", "meta.delta_eff", "meta.dt"):
            assert key in manifest

    def test_noise_dump(self, tmp_path):
        run_experiment(replace(short_row6(), models=("analytic",), output_dir=str(tmp_path)), workers=1,
                       dump_noise=True)
        assert (tmp_path / "noise_trajectory0.csv").read_text().startswith("t,xi1,xi2\n0.0,")

    def test_analytic_selection_kerr(self):
        c = preset_table1(5)
        res = resolve(c)
        t = res.times
        b = build_blocks(c.oscillator, c.pair, c.g0, res.delta_eff)
        np.testing.assert_array_equal(analytic_trace(c, res, t), analytic_kerr_correlated(b.v12, b.h12, c.noise[0], t))

    def test_analytic_selection_overkerr_decays(self):
        c = preset_table1(6)
        res = resolve(c)
        values = analytic_trace(c, res, res.times)
        assert np.all(values > 0)
