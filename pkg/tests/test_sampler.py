"""
Tests for optical gating
"""
import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.core.errors import ConfigError, EmptySampleSet
from src.core.sampler import (
    PulseShape, PulseTrain, SampleSet, check_phase_coverage, gate, gate_pair,
    rep_rate_for_ratio, sampling_ratio
)
from src.core.separator import MixingMatrix, mix
from src.core.signalgen import Waveform

FS = 1e9


def _waveform(values):
    return Waveform(FS, 0.0, values)


class TestPulseTrain:

    def test_rejects_overlapping_pulses(self):
        with pytest.raises(ConfigError):
            PulseTrain(rep_rate_hz=1e8, pulse_width_s=1e-8)

    def test_rejects_nonpositive_values(self):
        with pytest.raises(ConfigError):
            PulseTrain(rep_rate_hz=0.0, pulse_width_s=1e-9)
        with pytest.raises(ConfigError):
            PulseTrain(rep_rate_hz=1e6, pulse_width_s=0.0)
        with pytest.raises(ConfigError):
            PulseTrain(rep_rate_hz=1e6, pulse_width_s=1e-9, jitter_rms_s=-1e-12)

    def test_rect_kernel(self):
        offsets, weights = PulseTrain(4e6, 5e-9).kernel(FS)
        assert_array_equal(offsets, [-2, -1, 0, 1, 2])
        assert_allclose(weights, np.full(5, 0.2))

    def test_gaussian_kernel_is_normalized_and_symmetric(self):
        offsets, weights = PulseTrain(4e6, 4e-9, shape=PulseShape.GAUSSIAN).kernel(FS)
        assert weights.sum() == pytest.approx(1.0)
        assert_allclose(weights, weights[::-1])
        assert offsets[0] == -offsets[-1]


class TestGate:

    def test_constant_waveform(self):
        samples = gate(_waveform(np.full(1000, 0.75)), PulseTrain(4e6, 5e-9))
        assert_array_equal(samples.values[0], np.full(len(samples), 0.75))

    def test_pulse_count_and_times(self):
        samples = gate(_waveform(np.arange(1000.0)), PulseTrain(4e6, 1e-9))
        assert len(samples) == 4
        assert_allclose(samples.times_s, np.arange(4) * 250e-9)
        assert_array_equal(samples.channel(1), [0.0, 250.0, 500.0, 750.0])

    def test_windows_crossing_the_edge_are_dropped(self):
        samples = gate(_waveform(np.ones(1000)), PulseTrain(4e6, 5e-9, offset_s=0.0))
        assert samples.times_s[0] == pytest.approx(250e-9)

    def test_empty_when_no_pulse_fits(self):
        with pytest.raises(EmptySampleSet):
            gate(_waveform(np.ones(1000)), PulseTrain(1e6, 1e-9, offset_s=1e-3))

    def test_period_shorter_than_two_samples(self):
        with pytest.raises(ConfigError):
            gate(_waveform(np.ones(1000)), PulseTrain(6e8, 1e-9))

    def test_pair_geometry_mismatch(self):
        with pytest.raises(ConfigError):
            gate_pair(_waveform(np.ones(1000)), _waveform(np.ones(999)), PulseTrain(4e6, 1e-9))

    def test_linearity(self, rng):
        w1, w2 = _waveform(rng.normal(size=5000)), _waveform(rng.normal(size=5000))
        p = PulseTrain(4e6, 5e-9, shape=PulseShape.GAUSSIAN)
        combined = gate(w1.with_samples(2.0 * w1.samples - 3.0 * w2.samples), p)
        assert_allclose(combined.values[0], 2.0 * gate(w1, p).values[0] - 3.0 * gate(w2, p).values[0],
                        atol=1e-12)

    def test_commutes_with_mixing(self, rng):
        s, i = _waveform(rng.normal(size=5000)), _waveform(rng.normal(size=5000))
        A = MixingMatrix.from_rows([[1.0, 0.5], [0.3, 1.0]])
        p = PulseTrain(4e6, 5e-9)
        gated_mix = gate_pair(*mix(A, s, i), p)
        mixed_gates = A.as_array() @ gate_pair(s, i, p).values
        assert_allclose(gated_mix.values, mixed_gates, atol=1e-12)

    def test_jitter_is_seeded_and_keeps_time_order(self):
        p = PulseTrain(4e6, 1e-9, offset_s=20e-9, jitter_rms_s=5e-9)
        w = _waveform(np.arange(10000.0))
        a, b, c = gate(w, p, seed=1), gate(w, p, seed=1), gate(w, p, seed=2)
        assert_array_equal(a.times_s, b.times_s)
        assert not np.array_equal(a.times_s, c.times_s)
        assert np.all(np.diff(a.times_s) > 0)


class TestSampleSet:

    def test_validation(self):
        with pytest.raises(ConfigError):
            SampleSet([0.0, 1.0], [[1.0, 2.0, 3.0]])
        with pytest.raises(ConfigError):
            SampleSet([1.0, 0.0], [1.0, 2.0])
        with pytest.raises(ConfigError):
            SampleSet([0.0], np.ones((3, 1)))

    def test_channels_are_one_based(self):
        s = SampleSet([0.0, 1.0], [[1.0, 2.0], [3.0, 4.0]])
        assert s.n_channels == 2
        assert_array_equal(s.channel(2), [3.0, 4.0])
        with pytest.raises(ConfigError):
            s.channel(0)


class TestSamplingRatio:

    def test_ratio_of_rep_rate_to_nyquist(self):
        assert sampling_ratio(PulseTrain(4e6, 1e-9), 200e6) == pytest.approx(0.01)

    def test_rep_rate_is_bumped_to_a_coprime_period(self):
        rep = rep_rate_for_ratio(0.01, 200e6, FS, [5])
        assert rep == FS / 251

    def test_ratio_range(self):
        with pytest.raises(ConfigError):
            rep_rate_for_ratio(0.0, 200e6, FS)
        with pytest.raises(ConfigError):
            rep_rate_for_ratio(1.5, 200e6, FS)

    def test_phase_coverage_rule(self, caplog):
        with caplog.at_level(logging.WARNING):
            assert not check_phase_coverage(PulseTrain(FS / 250, 1e-9), FS, 5)
        assert 'not coprime' in caplog.text
        assert check_phase_coverage(PulseTrain(FS / 251, 1e-9), FS, 5)
