"""
Baseband source and interference waveform generation

All waveforms are real valued, uniformly sampled and piecewise constant per
symbol (rectangular NRZ shaping). Generation is pure given the seed.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DegenerateSignal
from ..data.alphabets import SourceAlphabets

logger = logging.getLogger(__name__)

_ALPHABETS = SourceAlphabets()

# relative slack when deciding that sample_rate / symbol_rate is an integer
_INTEGER_RATIO_TOL = 1e-9


class SourceKind(Enum):
    """Supported source models"""
    NRZ_BINARY = "nrz_binary"
    QAM16_REAL = "qam16_real"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class Waveform:
    """Uniformly sampled real-valued signal"""
    sample_rate_hz: float
    start_time_s: float
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise ConfigError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if not math.isfinite(self.start_time_s):
            raise ConfigError("start_time_s must be finite")
        samples = np.array(self.samples, dtype=float).reshape(-1)
        if samples.size == 0:
            raise ConfigError("waveform must contain at least one sample")
        if not np.all(np.isfinite(samples)):
            raise ConfigError("waveform samples must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, 'samples', samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples ** 2)))

    def times(self) -> np.ndarray:
        """Sample timestamps in seconds"""
        return self.start_time_s + np.arange(self.samples.size) / self.sample_rate_hz

    def same_geometry(self, other: "Waveform") -> bool:
        return (
            self.sample_rate_hz == other.sample_rate_hz
            and self.start_time_s == other.start_time_s
            and self.samples.size == other.samples.size
        )

    def with_samples(self, samples: np.ndarray) -> "Waveform":
        """New waveform on the same time grid"""
        return Waveform(self.sample_rate_hz, self.start_time_s, samples)


@dataclass(frozen=True)
class SourceSpec:
    """Description of one source: kind, rate, target RMS and optional seed"""
    kind: SourceKind
    rate_hz: float
    rms: float = 1.0
    seed: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.kind, SourceKind):
            object.__setattr__(self, 'kind', SourceKind(self.kind))
        if not (self.rate_hz > 0 and math.isfinite(self.rate_hz)):
            raise ConfigError(f"rate must be positive, got {self.rate_hz}")
        if not (self.rms >= 0 and math.isfinite(self.rms)):
            raise ConfigError(f"rms must be nonnegative, got {self.rms}")
        if self.seed is not None and self.seed < 0:
            raise ConfigError(f"seed must be unsigned, got {self.seed}")

    @property
    def kurtosis(self) -> float:
        return _ALPHABETS.kurtosis(self.kind.value)


def derive_seed(master_seed: int, *keys: int) -> int:
    """
    Derive an independent child seed from a master seed and a key path.

    Adding keys for new sources never changes the seeds of existing ones.
    """
    sequence = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def samples_per_symbol(symbol_rate_hz: float, sample_rate_hz: float) -> int:
    """Integer number of simulation samples per symbol, or ConfigError"""
    if symbol_rate_hz <= 0 or sample_rate_hz <= 0:
        raise ConfigError("symbol and sample rates must be positive")
    ratio = sample_rate_hz / symbol_rate_hz
    sps = int(round(ratio))
    if sps < 1 or abs(ratio - sps) > _INTEGER_RATIO_TOL * ratio:
        raise ConfigError(
            f"sample rate {sample_rate_hz:g} Hz is not an integer multiple of "
            f"symbol rate {symbol_rate_hz:g} Hz"
        )
    return sps


def _hold(symbols: np.ndarray, sps: int, sample_rate_hz: float) -> Waveform:
    return Waveform(sample_rate_hz, 0.0, np.repeat(symbols, sps))


def gen_nrz(
    bit_rate_hz: float,
    n_bits: int,
    sample_rate_hz: float,
    seed: int,
    bits: Optional[Sequence[int]] = None
) -> Waveform:
    """
    Random binary NRZ waveform with levels {-1, +1}.

    ``bits`` forces an explicit bit pattern (length n_bits) instead of drawing
    from the seeded generator.
    """
    if n_bits < 1:
        raise ConfigError(f"n_bits must be >= 1, got {n_bits}")
    sps = samples_per_symbol(bit_rate_hz, sample_rate_hz)
    if bits is None:
        bits = np.random.default_rng(seed).integers(0, 2, size=n_bits)
    else:
        bits = np.asarray(bits, dtype=int).reshape(-1)
        if bits.size != n_bits or not np.all((bits == 0) | (bits == 1)):
            raise ConfigError("explicit bit pattern must hold n_bits values in {0, 1}")
    return _hold(2.0 * bits - 1.0, sps, sample_rate_hz)


def gen_qam16_real(
    symbol_rate_hz: float,
    n_symbols: int,
    sample_rate_hz: float,
    seed: int
) -> Waveform:
    """Real part of a unit-variance 16QAM baseband signal (levels {±1, ±3}/√5)"""
    if n_symbols < 1:
        raise ConfigError(f"n_symbols must be >= 1, got {n_symbols}")
    sps = samples_per_symbol(symbol_rate_hz, sample_rate_hz)
    levels = _ALPHABETS.levels(SourceKind.QAM16_REAL.value)
    index = np.random.default_rng(seed).integers(0, levels.size, size=n_symbols)
    return _hold(levels[index], sps, sample_rate_hz)


def gen_gaussian(sample_rate_hz: float, n_samples: int, rms: float, seed: int) -> Waveform:
    """White zero-mean Gaussian samples with standard deviation ``rms``"""
    if rms < 0:
        raise ConfigError(f"rms must be nonnegative, got {rms}")
    if n_samples < 1:
        raise ConfigError(f"n_samples must be >= 1, got {n_samples}")
    samples = np.random.default_rng(seed).normal(0.0, rms, size=n_samples)
    return Waveform(sample_rate_hz, 0.0, samples)


def normalize_rms(w: Waveform, target_rms: float) -> Waveform:
    """Rescale by a single positive factor so the RMS equals target_rms"""
    if not target_rms > 0:
        raise ConfigError(f"target_rms must be positive, got {target_rms}")
    current = w.rms
    if current == 0.0:
        raise DegenerateSignal("cannot normalize an all-zero waveform")
    return w.with_samples(w.samples * (target_rms / current))


def generate_source(spec: SourceSpec, sample_rate_hz: float, n_samples: int, seed: int) -> Waveform:
    """
    Generate ``n_samples`` of the source described by ``spec``.

    Symbol-rate sources are drawn over whole symbols and truncated. Gaussian
    interference is held at its bandwidth so that gated and full-rate
    statistics agree.
    """
    if n_samples < 1:
        raise ConfigError(f"n_samples must be >= 1, got {n_samples}")
    if spec.seed is not None:
        seed = spec.seed
    sps = samples_per_symbol(spec.rate_hz, sample_rate_hz)
    n_symbols = -(-n_samples // sps)

    if spec.kind is SourceKind.NRZ_BINARY:
        w = gen_nrz(spec.rate_hz, n_symbols, sample_rate_hz, seed)
    elif spec.kind is SourceKind.QAM16_REAL:
        w = gen_qam16_real(spec.rate_hz, n_symbols, sample_rate_hz, seed)
    else:
        symbols = gen_gaussian(spec.rate_hz, n_symbols, 1.0, seed).samples
        w = _hold(symbols, sps, sample_rate_hz)

    logger.debug("Generated %s: %d symbols, %d samples/symbol", spec.kind.value, n_symbols, sps)
    # nrz and qam levels are unit RMS by construction; gaussian is unit variance
    return w.with_samples(w.samples[:n_samples] * spec.rms)


def nrz_bits(w: Waveform, bit_rate_hz: float) -> np.ndarray:
    """Bit decisions (0/1) of an NRZ waveform taken at mid-bit"""
    sps = samples_per_symbol(bit_rate_hz, w.sample_rate_hz)
    n_bits = len(w) // sps
    if n_bits < 1:
        raise ConfigError("waveform shorter than one bit")
    mid = np.arange(n_bits) * sps + sps // 2
    return (w.samples[mid] > 0).astype(int)
