"""
Tests for run reports and result files
"""
import copy
import json
import math

import numpy as np
import pandas as pd
import pytest

from src.api.pipeline import run_pipeline
from src.core.config import ScenarioConfig
from src.core.errors import IoError
from src.utils.reporting import (
    STATUS_OK, emit_curves, finite_or_none, report_from_json, report_to_json, summarize_report
)
from tests.helpers import BASE_SCENARIO


@pytest.fixture(scope='module')
def short_report():
    doc = copy.deepcopy(BASE_SCENARIO)
    doc['simulation']['duration_s'] = 1e-3
    return run_pipeline(ScenarioConfig.from_dict(doc))


class TestFiniteOrNone:

    @pytest.mark.parametrize('value', [float('nan'), float('inf'), -np.inf, None])
    def test_non_finite_becomes_none(self, value):
        assert finite_or_none(value) is None

    def test_numpy_scalars_become_builtins(self):
        assert type(finite_or_none(np.float64(1.5))) is float
        assert type(finite_or_none(np.int64(3))) is int
        assert finite_or_none(np.bool_(True)) is True


class TestReportJson:

    def test_round_trip(self, short_report):
        text = report_to_json(short_report)
        restored = report_from_json(text)
        assert restored.to_dict() == short_report.to_dict()
        assert restored.status == STATUS_OK

    def test_standard_json_without_timings(self, short_report):
        doc = json.loads(report_to_json(short_report))
        assert 'timings' not in doc
        assert doc['n_gated'] == short_report.n_gated
        assert doc['demix']['method'] == 'pca_ica'

    def test_timings_on_request(self, short_report):
        doc = json.loads(report_to_json(short_report, include_timings=True))
        assert set(doc['timings']) >= {'generate', 'gate', 'pca', 'ica', 'evaluate'}

    def test_identical_runs_serialize_identically(self, short_report):
        again = run_pipeline(ScenarioConfig.from_dict(short_report.config))
        assert report_to_json(again) == report_to_json(short_report)


class TestEmitCurves:

    def test_writes_all_files(self, short_report, tmp_path):
        paths = emit_curves(short_report, tmp_path / 'out')
        assert [p.name for p in paths] == ['moment2.csv', 'moment4.csv', 'eye.csv', 'report.json']

        moment2 = pd.read_csv(tmp_path / 'out' / 'moment2.csv')
        assert list(moment2.columns) == ['theta_deg', 'moment_theory', 'moment_estimated']
        assert moment2['theta_deg'].tolist() == [0.0, 45.0, 90.0, 135.0]
        moment4 = pd.read_csv(tmp_path / 'out' / 'moment4.csv')
        assert list(moment4.columns) == ['phi_deg', 'moment_theory', 'moment_estimated']
        assert len(moment4) == 8

        eye = pd.read_csv(tmp_path / 'out' / 'eye.csv')
        assert list(eye.columns) == ['phase', 'amplitude', 'count']
        assert eye['count'].sum() == short_report.eye.total

    def test_files_are_byte_identical_on_rewrite(self, short_report, tmp_path):
        first = emit_curves(short_report, tmp_path / 'a')
        second = emit_curves(short_report, tmp_path / 'b')
        for a, b in zip(first, second):
            assert a.read_bytes() == b.read_bytes()
            assert b'\r\n' not in a.read_bytes()

    def test_full_precision_floats(self, short_report, tmp_path):
        emit_curves(short_report, tmp_path)
        moment2 = pd.read_csv(tmp_path / 'moment2.csv', float_precision='round_trip')
        expected = [row['moment_estimated'] for row in short_report.moment2]
        assert moment2['moment_estimated'].tolist() == expected

    def test_unwritable_target(self, short_report, tmp_path):
        blocker = tmp_path / 'file'
        blocker.write_text('not a directory')
        with pytest.raises(IoError):
            emit_curves(short_report, blocker)


class TestSummary:

    def test_mentions_status_and_metrics(self, short_report):
        text = summarize_report(short_report)
        assert text.startswith('Status: ok')
        assert 'corr_soi=' in text
        assert 'PCA fit' in text and 'ICA fit' in text

    def test_missing_values_render_as_na(self, short_report):
        report = copy.copy(short_report)
        report.oracle = dict(short_report.oracle, phi0_error_deg=None)
        assert 'n/a' in summarize_report(report)
        assert not math.isnan(short_report.oracle['theta0_error_deg'])
