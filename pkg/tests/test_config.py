"""
Tests for scenario configuration loading
"""
import json
from pathlib import Path

import pytest

from src.core.config import ScenarioConfig, load_config, parse_si
from src.core.errors import ConfigError
from src.core.sampler import PulseShape
from src.core.signalgen import SourceKind

REPO_ROOT = Path(__file__).resolve().parent.parent
SHIPPED_SCENARIOS = sorted(REPO_ROOT.glob('scenarios/*.json')) + [REPO_ROOT / 'scenario_config.json']


class TestParseSi:

    @pytest.mark.parametrize('text, expected', [
        ('200M', 200e6), ('5n', 5e-9), ('1m', 1e-3), ('2.5GHz', 2.5e9),
        ('1e-2', 0.01), ('  10 k ', 1e4), (42, 42.0), ('50ps', 50e-12),
    ])
    def test_values(self, text, expected):
        assert parse_si(text) == pytest.approx(expected)

    @pytest.mark.parametrize('bad', ['abc', '5X', '', True, None, float('inf'), [1]])
    def test_rejects(self, bad):
        with pytest.raises(ConfigError):
            parse_si(bad, 'pulse.rep_rate_hz')

    def test_message_is_path_qualified(self):
        with pytest.raises(ConfigError, match=r'^pulse\.rep_rate_hz'):
            parse_si('fast', 'pulse.rep_rate_hz')


class TestScenarioConfig:

    def test_base_scenario(self, make_config):
        cfg = make_config()
        assert cfg.n_samples == 1_000_000
        assert cfg.soi.kind is SourceKind.QAM16_REAL
        assert cfg.interference.rate_hz == 200e6
        assert cfg.pulse.rep_rate_hz == 1e9 / 251
        assert cfg.pulse.shape is PulseShape.RECT
        assert cfg.symbol_periods() == [5, 5]
        assert cfg.kurtosis_axis == 'min'

    def test_si_strings(self, make_config):
        cfg = make_config(simulation={'sample_rate_hz': '1G', 'duration_s': '1m'},
                          pulse={'pulse_width_s': '1n'})
        assert cfg.n_samples == 1_000_000
        assert cfg.pulse.pulse_width_s == pytest.approx(1e-9)

    def test_seed_override(self, scenario_doc):
        assert ScenarioConfig.from_dict(scenario_doc(), seed_override=99).master_seed == 99

    def test_round_trip(self, make_config):
        cfg = make_config(soi={'seed': 5}, pulse={'jitter_rms_s': 1e-12})
        assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg

    def test_mixing_by_entries(self, make_config):
        cfg = make_config(mixing={'matrix': None, 'a11': 1, 'a12': 0.2, 'a21': 0.1, 'a22': 1})
        assert cfg.mixing.a12 == 0.2

    def test_with_sampling_ratio(self, make_config):
        cfg = make_config()
        coarser = cfg.with_sampling_ratio(0.001)
        assert coarser.pulse.rep_rate_hz == 1e9 / 2501
        assert coarser.soi == cfg.soi
        assert cfg.with_seed(7).master_seed == 7

    def test_gaussian_defaults_to_simulation_rate(self, make_config):
        cfg = make_config(interference={'bandwidth_hz': None})
        assert cfg.interference.rate_hz == 1e9

    @pytest.mark.parametrize('overrides, path', [
        ({'pulse': {'pulse_width_s': -1e-9}}, r'^pulse\.pulse_width_s'),
        ({'pulse': {'rep_rate_hz': 1e6}}, r'^pulse'),
        ({'soi': {'kind': 'qpsk'}}, r'^soi\.kind'),
        ({'soi': {'symbol_rate_hz': 300e6}}, r'^soi'),
        ({'soi': {'rms': -1}}, r'^soi'),
        ({'mixing': {'matrix': [[1, 2], [2, 4]]}}, r'^mixing'),
        ({'mixing': {'matrix': [1, 2, 3, 4]}}, r'^mixing\.matrix'),
        ({'estimation': {'theta_grid_deg': [0, 90]}}, r'^estimation\.theta_grid_deg'),
        ({'estimation': {'phi_grid_deg': [0, 190, 20, 30, 40]}}, r'^estimation\.phi_grid_deg'),
        ({'estimation': {'kurtosis_axis': 'sideways'}}, r'^estimation\.kurtosis_axis'),
        ({'evaluation': {'eye_phase_bins': 0}}, r'^evaluation\.eye_phase_bins'),
        ({'simulation': {'master_seed': 1.5}}, r'^simulation\.master_seed'),
    ])
    def test_path_qualified_rejections(self, make_config, overrides, path):
        with pytest.raises(ConfigError, match=path):
            make_config(**overrides)

    def test_missing_and_unknown_sections(self, scenario_doc):
        doc = scenario_doc()
        del doc['soi']
        with pytest.raises(ConfigError, match=r'^soi: section is missing'):
            ScenarioConfig.from_dict(doc)
        with pytest.raises(ConfigError, match='unknown section'):
            ScenarioConfig.from_dict(scenario_doc(plotting={'dpi': 300}))

    def test_pulse_needs_a_rate(self, scenario_doc):
        doc = scenario_doc()
        del doc['pulse']['sampling_ratio']
        with pytest.raises(ConfigError, match=r'^pulse\.rep_rate_hz: required'):
            ScenarioConfig.from_dict(doc)


class TestLoadConfig:

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match='no such scenario file'):
            load_config(tmp_path / 'absent.json')

    def test_invalid_json(self, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text('{"soi": ')
        with pytest.raises(ConfigError, match='invalid JSON'):
            load_config(path)

    def test_loads_written_file(self, scenario_file):
        assert load_config(scenario_file(), seed_override=3).master_seed == 3

    @pytest.mark.parametrize('path', SHIPPED_SCENARIOS, ids=lambda p: p.name)
    def test_shipped_scenarios_are_valid(self, path):
        cfg = load_config(path)
        assert cfg.n_samples > 0
        json.dumps(cfg.to_dict())
