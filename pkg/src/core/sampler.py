"""
Optical pulse-train gating: sparse sub-Nyquist sampling of full-rate waveforms

Each pulse produces one sample, the pulse-shape-weighted average of the
waveform under the gate window. Gate weights always sum to one.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Tuple

import numpy as np

from .errors import ConfigError, EmptySampleSet
from .signalgen import Waveform

logger = logging.getLogger(__name__)

# gaussian gate kernels are truncated at this many standard deviations
_GAUSSIAN_SPAN_SIGMAS = 3.0
_FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


class PulseShape(Enum):
    """Temporal shape of an optical gate"""
    RECT = "rect"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class PulseTrain:
    """
    Periodic optical gating schedule.

    ``offset_s`` is the time of the first pulse centre; ``None`` places it half
    a gate width after the waveform start so the first window fits.
    For gaussian pulses ``pulse_width_s`` is the full width at half maximum.
    """
    rep_rate_hz: float
    pulse_width_s: float
    shape: PulseShape = PulseShape.RECT
    offset_s: Optional[float] = None
    jitter_rms_s: float = 0.0

    def __post_init__(self):
        if not isinstance(self.shape, PulseShape):
            object.__setattr__(self, 'shape', PulseShape(self.shape))
        if not (self.rep_rate_hz > 0 and math.isfinite(self.rep_rate_hz)):
            raise ConfigError(f"rep_rate_hz must be positive, got {self.rep_rate_hz}")
        if not (self.pulse_width_s > 0 and math.isfinite(self.pulse_width_s)):
            raise ConfigError(f"pulse_width_s must be positive, got {self.pulse_width_s}")
        if self.pulse_width_s >= self.period_s:
            raise ConfigError(
                f"pulse_width_s {self.pulse_width_s:g} must be shorter than the "
                f"pulse period {self.period_s:g} (pulses would overlap)"
            )
        if self.offset_s is not None and not (self.offset_s >= 0 and math.isfinite(self.offset_s)):
            raise ConfigError(f"offset_s must be nonnegative, got {self.offset_s}")
        if not (self.jitter_rms_s >= 0 and math.isfinite(self.jitter_rms_s)):
            raise ConfigError(f"jitter_rms_s must be nonnegative, got {self.jitter_rms_s}")

    @property
    def period_s(self) -> float:
        return 1.0 / self.rep_rate_hz

    def kernel(self, sample_rate_hz: float) -> Tuple[np.ndarray, np.ndarray]:
        """Integer sample offsets relative to the pulse centre and normalized weights"""
        if self.shape is PulseShape.RECT:
            width = max(1, int(round(self.pulse_width_s * sample_rate_hz)))
            offsets = np.arange(width) - width // 2
            weights = np.full(width, 1.0 / width)
            return offsets, weights

        sigma = self.pulse_width_s / _FWHM_PER_SIGMA * sample_rate_hz
        half = int(math.ceil(_GAUSSIAN_SPAN_SIGMAS * sigma))
        offsets = np.arange(-half, half + 1)
        if half == 0:
            return offsets, np.ones(1)
        weights = np.exp(-0.5 * (offsets / sigma) ** 2)
        return offsets, weights / weights.sum()

    def first_center_s(self, sample_rate_hz: float) -> float:
        if self.offset_s is not None:
            return self.offset_s
        offsets, _ = self.kernel(sample_rate_hz)
        return -offsets[0] / sample_rate_hz


@dataclass(frozen=True)
class SampleSet:
    """Timestamped gated samples, one row per channel"""
    times_s: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    source_rate_hz: float = 0.0

    def __post_init__(self):
        times = np.array(self.times_s, dtype=float).reshape(-1)
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(1, -1)
        if values.ndim != 2 or values.shape[0] not in (1, 2):
            raise ConfigError("sample set must hold one or two channels")
        if values.shape[1] != times.size:
            raise ConfigError(
                f"channel length {values.shape[1]} does not match {times.size} timestamps"
            )
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ConfigError("sample times must be strictly increasing")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(times))):
            raise ConfigError("sample values must be finite")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, 'times_s', times)
        object.__setattr__(self, 'values', values)

    def __len__(self) -> int:
        return self.times_s.size

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    def channel(self, index: int) -> np.ndarray:
        """Channel values, 1-based as in x1 / x2"""
        if index not in range(1, self.n_channels + 1):
            raise ConfigError(f"channel {index} not present in a {self.n_channels}-channel set")
        return self.values[index - 1]

    def with_values(self, values: np.ndarray) -> "SampleSet":
        return SampleSet(self.times_s, values, self.source_rate_hz)


def _pulse_indices(length: int, sample_rate_hz: float, p: PulseTrain, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Centre sample indices of every pulse whose whole window fits, plus the kernel"""
    period_samples = sample_rate_hz / p.rep_rate_hz
    if period_samples < 2:
        raise ConfigError(
            f"pulse period is {period_samples:.3g} waveform samples; at least 2 are required"
        )
    offsets, weights = p.kernel(sample_rate_hz)
    duration_s = length / sample_rate_hz
    first = p.first_center_s(sample_rate_hz)
    n_pulses = int(math.floor((duration_s - first) * p.rep_rate_hz)) + 1 if first < duration_s else 0
    if n_pulses <= 0:
        raise EmptySampleSet("no pulse falls inside the waveform")

    centers_s = first + np.arange(n_pulses) * p.period_s
    if p.jitter_rms_s > 0:
        centers_s = centers_s + np.random.default_rng(seed).normal(0.0, p.jitter_rms_s, n_pulses)

    centers = np.rint(centers_s * sample_rate_hz).astype(np.int64)
    centers = np.unique(centers)
    # pulses crossing either edge are dropped, not truncated
    inside = (centers + offsets[0] >= 0) & (centers + offsets[-1] < length)
    centers = centers[inside]
    if centers.size == 0:
        raise EmptySampleSet("no pulse window lies entirely inside the waveform")
    return centers, (offsets, weights)


def _gate_arrays(arrays: Iterable[np.ndarray], centers: np.ndarray, kernel) -> np.ndarray:
    offsets, weights = kernel
    window = centers[:, None] + offsets[None, :]
    if np.all(weights == weights[0]):
        # rect: plain mean keeps constant windows exact
        return np.vstack([np.asarray(a)[window].mean(axis=1) for a in arrays])
    return np.vstack([np.asarray(a)[window] @ weights for a in arrays])


def gate(w: Waveform, p: PulseTrain, seed: int = 0) -> SampleSet:
    """Gate a single waveform with the pulse train"""
    centers, kernel = _pulse_indices(len(w), w.sample_rate_hz, p, seed)
    times = w.start_time_s + centers / w.sample_rate_hz
    return SampleSet(times, _gate_arrays([w.samples], centers, kernel), w.sample_rate_hz)


def gate_pair(w1: Waveform, w2: Waveform, p: PulseTrain, seed: int = 0) -> SampleSet:
    """Gate both receiver branches with the same (jittered) pulses"""
    if not w1.same_geometry(w2):
        raise ConfigError("gate_pair needs waveforms with equal rate, start time and length")
    centers, kernel = _pulse_indices(len(w1), w1.sample_rate_hz, p, seed)
    times = w1.start_time_s + centers / w1.sample_rate_hz
    values = _gate_arrays([w1.samples, w2.samples], centers, kernel)
    logger.debug("Gated %d pulses from %d samples", centers.size, len(w1))
    return SampleSet(times, values, w1.sample_rate_hz)


def sampling_ratio(p: PulseTrain, signal_bandwidth_hz: float) -> float:
    """Gated samples per Nyquist-rate sample of the signal"""
    if not signal_bandwidth_hz > 0:
        raise ConfigError(f"signal bandwidth must be positive, got {signal_bandwidth_hz}")
    return p.rep_rate_hz / (2.0 * signal_bandwidth_hz)


def check_phase_coverage(p: PulseTrain, sample_rate_hz: float, samples_per_symbol: int) -> bool:
    """
    True when the pulse period in samples is an integer coprime with the
    symbol period, so successive gates walk through every symbol phase.
    """
    period = sample_rate_hz / p.rep_rate_hz
    period_int = int(round(period))
    ok = abs(period - period_int) < 1e-9 * period and math.gcd(period_int, samples_per_symbol) == 1
    if not ok:
        logger.warning(
            "Pulse period of %.6g samples is not coprime with the %d-sample symbol period; "
            "gates revisit the same symbol phases", period, samples_per_symbol
        )
    return ok


def rep_rate_for_ratio(
    ratio: float,
    bandwidth_hz: float,
    sample_rate_hz: float,
    symbol_periods: Iterable[int] = ()
) -> float:
    """
    Repetition rate giving ``ratio`` gated samples per Nyquist sample, rounded
    to an integer pulse period that is coprime with every symbol period.
    """
    if not (0 < ratio <= 1):
        raise ConfigError(f"sampling ratio must lie in (0, 1], got {ratio}")
    period = max(2, int(round(sample_rate_hz / (ratio * 2.0 * bandwidth_hz))))
    periods = [int(s) for s in symbol_periods]
    while any(math.gcd(period, s) != 1 for s in periods):
        period += 1
    return sample_rate_hz / period
