"""
End-to-end pipeline tests
"""
from dataclasses import replace

import numpy as np
import pytest

from src.api.pipeline import SeparationPipeline, run_pipeline
from src.core.config import ScenarioConfig
from src.core.errors import EmptySampleSet
from src.core.evalkit import angle_error, cov_oracle, grid_fit_oracle
from src.core.signalgen import SourceKind
from src.utils.reporting import STATUS_DEGENERATE, STATUS_OK, STATUS_UNIDENTIFIABLE, report_to_json
from tests.helpers import BASE_SCENARIO


@pytest.fixture(scope='module')
def base_report():
    return run_pipeline(ScenarioConfig.from_dict(BASE_SCENARIO))


class TestRunPipeline:

    def test_separates_the_base_scenario(self, base_report):
        assert base_report.status == STATUS_OK
        assert base_report.exit_code == 0
        assert 3900 < base_report.n_gated < 4000
        assert base_report.sampling_ratio == pytest.approx(0.01, rel=0.01)
        assert base_report.separation.corr_soi > 0.98
        assert base_report.demix.method == 'pca_ica'

    def test_angles_close_to_oracle(self, base_report):
        assert base_report.oracle['theta0_error_deg'] < 3.0
        assert base_report.oracle['phi0_error_deg'] < 6.0

    def test_moment_curves(self, base_report):
        assert [row['theta_deg'] for row in base_report.moment2] == [0.0, 45.0, 90.0, 135.0]
        assert len(base_report.moment4) == 8
        for row in base_report.moment2:
            assert row['moment_theory'] == pytest.approx(row['moment_estimated'], rel=0.1)
        for row in base_report.moment4:
            assert row['moment_theory'] == pytest.approx(row['moment_estimated'], rel=0.25)

    def test_theory_at_zero_is_c11(self, base_report):
        oracle = base_report.oracle
        a11, a12 = 1.0, 0.5
        c11 = a11 ** 2 * oracle['var_soi'] + a12 ** 2 * oracle['var_int']
        assert base_report.moment2[0]['moment_theory'] == pytest.approx(c11)
        q1, q2, _ = cov_oracle([[1.0, 0.5], [0.3, 1.0]], oracle['var_soi'], oracle['var_int'])
        assert oracle['q1'] == pytest.approx(q1)

    def test_oracle_uses_scenario_statistics(self, base_report):
        oracle = base_report.oracle
        assert oracle['var_soi'] == 1.0
        assert oracle['var_int'] == 1.0
        assert oracle['kurtosis_soi'] == pytest.approx(1.64)
        assert oracle['kurtosis_int'] == pytest.approx(3.0)
        assert oracle['var_soi_gated'] == pytest.approx(1.0, rel=0.1)
        assert oracle['theta0_gated_deg'] is not None
        assert all('moment_theory_gated' in row for row in base_report.moment2)
        assert all('moment_theory_gated' in row for row in base_report.moment4)

    def test_theory_does_not_depend_on_the_realization(self, base_report):
        other = run_pipeline(ScenarioConfig.from_dict(BASE_SCENARIO).with_seed(99), evaluate_eye=False)
        assert [r['moment_theory'] for r in other.moment2] == [r['moment_theory'] for r in base_report.moment2]
        assert other.oracle['theta0_deg'] == base_report.oracle['theta0_deg']
        assert other.oracle['var_soi_gated'] != base_report.oracle['var_soi_gated']

    def test_whitened_samples_are_white(self, base_report):
        assert base_report.whiteness <= 5.0 / np.sqrt(base_report.n_gated)

    def test_eyes(self, base_report):
        assert base_report.eye.total == 1_000_000
        assert base_report.eye_sampled.total == base_report.n_gated

    def test_stage_timings(self, base_report):
        for stage in ('generate', 'mix', 'gate', 'pca', 'whiten', 'ica', 'compose', 'apply', 'evaluate'):
            assert base_report.timings[stage] >= 0.0
        assert 'timings' not in base_report.to_dict()

    def test_deterministic(self, make_config):
        cfg = make_config(simulation={'duration_s': 2e-4})
        first, second = run_pipeline(cfg), run_pipeline(cfg)
        assert report_to_json(first) == report_to_json(second)

    def test_seed_changes_the_run(self, make_config):
        cfg = make_config(simulation={'duration_s': 2e-4})
        assert report_to_json(run_pipeline(cfg)) != report_to_json(run_pipeline(cfg.with_seed(5)))


class TestDegenerateScenarios:

    def test_zero_interference_identity_mixing(self, make_config):
        cfg = make_config(interference={'rms': 0.0}, mixing={'matrix': [[1.0, 0.0], [0.0, 1.0]]})
        report = run_pipeline(cfg)
        assert report.status == STATUS_DEGENERATE
        assert report.exit_code == 2
        assert report.failed_stage == 'pca'
        assert report.demix.method == 'rank_one'
        assert report.separation.corr_soi == pytest.approx(1.0, abs=1e-9)
        assert report.oracle['q1'] is None

    def test_gaussian_pair_is_unidentifiable(self, make_config):
        cfg = make_config(simulation={'duration_s': 3e-3}, soi={'kind': 'gaussian', 'symbol_rate_hz': None,
                                                                'bandwidth_hz': 200e6})
        assert cfg.soi.kind is SourceKind.GAUSSIAN
        report = run_pipeline(cfg)
        assert report.status == STATUS_UNIDENTIFIABLE
        assert report.exit_code == 2
        assert report.failed_stage == 'ica'
        assert not report.fourth_fit.identifiable
        assert report.demix.method == 'pca_only'
        assert report.oracle['phi0_error_deg'] is None

    def test_errors_carry_their_stage(self, make_config):
        cfg = make_config()
        cfg = replace(cfg, pulse=replace(cfg.pulse, offset_s=2e-3))
        with pytest.raises(EmptySampleSet) as excinfo:
            SeparationPipeline(cfg).run()
        assert excinfo.value.stage == 'gate'
        assert str(excinfo.value).startswith('[gate]')


class TestNrzEye:

    def test_ber_and_open_eye(self, make_config):
        cfg = make_config(soi={'kind': 'nrz_binary'}, mixing={'matrix': [[1.0, 0.6], [0.4, 1.0]]})
        report = run_pipeline(cfg)
        assert report.status == STATUS_OK
        assert report.separation.ber is not None
        assert report.separation.ber <= 1e-3
        assert report.eye.mid_band_fraction() <= 0.01


class TestGridOracleOnPipelineCurves:

    @pytest.mark.parametrize('seed', range(4))
    def test_grid_and_least_squares_agree(self, make_config, seed):
        report = run_pipeline(make_config().with_seed(seed), evaluate_eye=False)
        assert report.fourth_fit is not None
        curve2 = [(row['theta_deg'], row['moment_estimated']) for row in report.moment2]
        curve4 = [(row['phi_deg'], row['moment_estimated']) for row in report.moment4]
        grid2 = grid_fit_oracle(curve2, 2)
        grid4 = grid_fit_oracle(curve4, 4)
        assert angle_error(grid2.theta0_deg, report.second_fit.theta0_deg, 180.0) <= 0.1 + 1e-9
        assert angle_error(grid4.phi0_deg, report.fourth_fit.phi0_deg, 90.0) <= 0.1 + 1e-9
        assert grid4.p3 == pytest.approx(report.fourth_fit.p3, rel=0.01)
