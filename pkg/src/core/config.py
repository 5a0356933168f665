"""
Scenario configuration: JSON sections with SI-suffixed numbers
"""
import json
import logging
import math
import re
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, Optional, Union

from .errors import ConfigError, SeparationError
from .estimator import DEFAULT_PHI_GRID, DEFAULT_THETA_GRID, AngleGrid
from .sampler import PulseShape, PulseTrain, check_phase_coverage, rep_rate_for_ratio
from .separator import MixingMatrix
from .signalgen import SourceKind, SourceSpec, samples_per_symbol

logger = logging.getLogger(__name__)

SI_PREFIXES = {
    '': 1.0, 'p': 1e-12, 'n': 1e-9, 'u': 1e-6, 'µ': 1e-6, 'm': 1e-3,
    'k': 1e3, 'M': 1e6, 'G': 1e9, 'T': 1e12
}
_SI_PATTERN = re.compile(
    r'^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([pnuµmkMGT]?)\s*(?:Hz|s|bps)?\s*$'
)

DEFAULTS = {
    'sample_rate_hz': 10e9,
    'duration_s': 1e-3,
    'pulse_width_s': 5e-9,
    'eye_phase_bins': 32,
    'eye_amplitude_bins': 64,
}

SECTIONS = ('simulation', 'soi', 'interference', 'mixing', 'pulse', 'estimation', 'evaluation')


def parse_si(value: Union[str, int, float], path: str = "value") -> float:
    """Parse a number that may carry an SI prefix, e.g. '200M', '5n', '1m'"""
    if isinstance(value, bool):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        number = float(value)
    elif isinstance(value, str):
        match = _SI_PATTERN.match(value)
        if not match:
            raise ConfigError(f"{path}: cannot parse {value!r} as a number")
        number = float(match.group(1)) * SI_PREFIXES[match.group(2)]
    else:
        raise ConfigError(f"{path}: expected a number, got {type(value).__name__}")
    if not math.isfinite(number):
        raise ConfigError(f"{path}: must be finite")
    return number


@contextmanager
def _section_path(path: str):
    """Re-raise any pipeline error as a path-qualified ConfigError"""
    try:
        yield
    except ConfigError as e:
        if e.message.startswith(path):
            raise
        raise ConfigError(f"{path}: {e.message}") from e
    except SeparationError as e:
        raise ConfigError(f"{path}: {e.message}") from e


class _Section:
    """Typed accessor over one JSON section"""

    def __init__(self, doc: Dict[str, Any], name: str, required: bool = True):
        raw = doc.get(name)
        if raw is None:
            if required:
                raise ConfigError(f"{name}: section is missing")
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError(f"{name}: section must be an object")
        self.name = name
        self.raw = raw

    def path(self, key: str) -> str:
        return f"{self.name}.{key}"

    def has(self, key: str) -> bool:
        return self.raw.get(key) is not None

    def number(self, key: str, default: Optional[float] = None) -> float:
        if not self.has(key):
            if default is None:
                raise ConfigError(f"{self.path(key)}: required")
            return float(default)
        return parse_si(self.raw[key], self.path(key))

    def positive(self, key: str, default: Optional[float] = None) -> float:
        value = self.number(key, default)
        if not value > 0:
            raise ConfigError(f"{self.path(key)}: must be positive, got {value}")
        return value

    def integer(self, key: str, default: Optional[int] = None, minimum: int = 0) -> int:
        value = self.number(key, default)
        if value != int(value) or value < minimum:
            raise ConfigError(f"{self.path(key)}: must be an integer >= {minimum}, got {value}")
        return int(value)

    def text(self, key: str, default: Optional[str] = None) -> str:
        value = self.raw.get(key, default)
        if not isinstance(value, str):
            raise ConfigError(f"{self.path(key)}: required text value")
        return value


@dataclass(frozen=True)
class ScenarioConfig:
    """Every knob of one simulated experiment"""
    soi: SourceSpec
    interference: SourceSpec
    mixing: MixingMatrix
    pulse: PulseTrain
    theta_grid: AngleGrid
    phi_grid: AngleGrid
    sample_rate_hz: float
    duration_s: float
    master_seed: int
    kurtosis_axis: str = "min"
    eye_phase_bins: int = 32
    eye_amplitude_bins: int = 64

    @property
    def n_samples(self) -> int:
        return max(1, int(round(self.duration_s * self.sample_rate_hz)))

    @property
    def signal_bandwidth_hz(self) -> float:
        return max(self.soi.rate_hz, self.interference.rate_hz)

    def symbol_periods(self):
        return [samples_per_symbol(spec.rate_hz, self.sample_rate_hz)
                for spec in (self.soi, self.interference)]

    def with_seed(self, master_seed: int) -> "ScenarioConfig":
        return replace(self, master_seed=int(master_seed))

    def with_sampling_ratio(self, ratio: float) -> "ScenarioConfig":
        """Same scenario with the repetition rate re-derived for ``ratio``"""
        rep = rep_rate_for_ratio(ratio, self.signal_bandwidth_hz, self.sample_rate_hz,
                                 self.symbol_periods())
        return replace(self, pulse=replace(self.pulse, rep_rate_hz=rep))

    @classmethod
    def from_dict(cls, doc: Dict[str, Any], seed_override: Optional[int] = None) -> "ScenarioConfig":
        if not isinstance(doc, dict):
            raise ConfigError("scenario: document must be a JSON object")
        unknown = sorted(set(doc) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"scenario: unknown section(s) {', '.join(unknown)}")

        sim = _Section(doc, 'simulation', required=False)
        sample_rate = sim.positive('sample_rate_hz', DEFAULTS['sample_rate_hz'])
        duration = sim.positive('duration_s', DEFAULTS['duration_s'])
        master_seed = sim.integer('master_seed', 0)
        if seed_override is not None:
            master_seed = int(seed_override)

        soi = _source(_Section(doc, 'soi'), sample_rate)
        interference = _source(_Section(doc, 'interference'), sample_rate)
        mixing = _mixing(_Section(doc, 'mixing'))

        estimation = _Section(doc, 'estimation', required=False)
        with _section_path('estimation.theta_grid_deg'):
            theta_grid = AngleGrid(tuple(estimation.raw.get('theta_grid_deg', DEFAULT_THETA_GRID)))
            theta_grid.require(2)
        with _section_path('estimation.phi_grid_deg'):
            phi_grid = AngleGrid(tuple(estimation.raw.get('phi_grid_deg', DEFAULT_PHI_GRID)))
            phi_grid.require(4)
        axis = estimation.text('kurtosis_axis', 'min')
        if axis not in ('min', 'max'):
            raise ConfigError(f"estimation.kurtosis_axis: must be 'min' or 'max', got {axis!r}")

        evaluation = _Section(doc, 'evaluation', required=False)
        phase_bins = evaluation.integer('eye_phase_bins', DEFAULTS['eye_phase_bins'], minimum=1)
        amplitude_bins = evaluation.integer('eye_amplitude_bins', DEFAULTS['eye_amplitude_bins'], minimum=1)

        periods = [samples_per_symbol(s.rate_hz, sample_rate) for s in (soi, interference)]
        pulse = _pulse(_Section(doc, 'pulse'), sample_rate, max(soi.rate_hz, interference.rate_hz), periods)

        return cls(soi, interference, mixing, pulse, theta_grid, phi_grid, sample_rate,
                   duration, master_seed, axis, phase_bins, amplitude_bins)

    def to_dict(self) -> Dict[str, Any]:
        """Normalized echo; from_dict(to_dict()) rebuilds an identical scenario"""
        pulse = {
            'rep_rate_hz': self.pulse.rep_rate_hz,
            'pulse_width_s': self.pulse.pulse_width_s,
            'shape': self.pulse.shape.value,
            'jitter_rms_s': self.pulse.jitter_rms_s,
        }
        if self.pulse.offset_s is not None:
            pulse['offset_s'] = self.pulse.offset_s
        return {
            'simulation': {
                'sample_rate_hz': self.sample_rate_hz,
                'duration_s': self.duration_s,
                'master_seed': self.master_seed,
            },
            'soi': _source_dict(self.soi),
            'interference': _source_dict(self.interference),
            'mixing': {'matrix': self.mixing.as_array().tolist()},
            'pulse': pulse,
            'estimation': {
                'theta_grid_deg': list(self.theta_grid.angles_deg),
                'phi_grid_deg': list(self.phi_grid.angles_deg),
                'kurtosis_axis': self.kurtosis_axis,
            },
            'evaluation': {
                'eye_phase_bins': self.eye_phase_bins,
                'eye_amplitude_bins': self.eye_amplitude_bins,
            },
        }


def _source(section: _Section, sample_rate: float) -> SourceSpec:
    with _section_path(section.name):
        kind_text = section.text('kind')
        try:
            kind = SourceKind(kind_text)
        except ValueError:
            options = ', '.join(k.value for k in SourceKind)
            raise ConfigError(f"{section.path('kind')}: unknown source {kind_text!r} (use {options})")
        if section.has('symbol_rate_hz'):
            rate = section.positive('symbol_rate_hz')
        elif section.has('bandwidth_hz'):
            rate = section.positive('bandwidth_hz')
        elif kind is SourceKind.GAUSSIAN:
            rate = sample_rate
        else:
            raise ConfigError(f"{section.path('symbol_rate_hz')}: required")
        rms = section.number('rms', 1.0)
        seed = section.integer('seed') if section.has('seed') else None
        samples_per_symbol(rate, sample_rate)
        return SourceSpec(kind, rate, rms, seed)


def _source_dict(spec: SourceSpec) -> Dict[str, Any]:
    rate_key = 'bandwidth_hz' if spec.kind is SourceKind.GAUSSIAN else 'symbol_rate_hz'
    out = {'kind': spec.kind.value, rate_key: spec.rate_hz, 'rms': spec.rms}
    if spec.seed is not None:
        out['seed'] = spec.seed
    return out


def _mixing(section: _Section) -> MixingMatrix:
    with _section_path(section.name):
        if section.has('matrix'):
            rows = section.raw['matrix']
            if not (isinstance(rows, list) and len(rows) == 2 and all(isinstance(r, list) and len(r) == 2 for r in rows)):
                raise ConfigError(f"{section.path('matrix')}: must be [[a11, a12], [a21, a22]]")
            values = [[parse_si(v, section.path('matrix')) for v in row] for row in rows]
            return MixingMatrix.from_rows(values)
        return MixingMatrix(*(section.number(k) for k in ('a11', 'a12', 'a21', 'a22')))


def _pulse(section: _Section, sample_rate: float, bandwidth: float, periods) -> PulseTrain:
    with _section_path(section.name):
        if section.has('rep_rate_hz') and section.has('sampling_ratio'):
            raise ConfigError(f"{section.name}: give either rep_rate_hz or sampling_ratio, not both")
        if section.has('sampling_ratio'):
            rep = rep_rate_for_ratio(section.number('sampling_ratio'), bandwidth, sample_rate, periods)
        else:
            rep = section.positive('rep_rate_hz')
        shape = section.text('shape', PulseShape.RECT.value)
        try:
            shape = PulseShape(shape)
        except ValueError:
            raise ConfigError(f"{section.path('shape')}: unknown pulse shape {shape!r}")
        pulse = PulseTrain(
            rep_rate_hz=rep,
            pulse_width_s=section.positive('pulse_width_s', DEFAULTS['pulse_width_s']),
            shape=shape,
            offset_s=section.number('offset_s') if section.has('offset_s') else None,
            jitter_rms_s=section.number('jitter_rms_s', 0.0),
        )
        if sample_rate / rep < 2:
            raise ConfigError(f"{section.name}: pulse period is shorter than 2 simulation samples")
        for period in periods:
            check_phase_coverage(pulse, sample_rate, period)
        return pulse


def load_config(path: Union[str, Path], seed_override: Optional[int] = None) -> ScenarioConfig:
    """Read and validate a scenario file"""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such scenario file")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})")
    return ScenarioConfig.from_dict(doc, seed_override=seed_override)
