"""
Separation quality metrics and analytic oracles

Every metric is invariant to the sign and scale ambiguity inherent to blind
separation. Oracles compute the exact moment curves implied by a known
mixing matrix and known source statistics.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import ConfigError, DegenerateSignal, EmptySampleSet, InsufficientAngles
from .estimator import (
    FLAT_KURTOSIS_RATIO, DEGENERATE_PCA_RATIO, MIN_ANGLES, FourthMomentFit, MomentCurve,
    SecondMomentFit, as_curve, cos_sin_deg, distinct_angle_count, fold_angle
)
from .sampler import SampleSet
from .separator import DemixMatrix, MixingMatrix, build_pca
from .signalgen import Waveform, samples_per_symbol

logger = logging.getLogger(__name__)

SINR_CAP_DB = 120.0
EYE_MID_BAND = 0.25
GRID_STEP_DEG = 0.1

Signal = Union[Waveform, np.ndarray]
Matrix = Union[MixingMatrix, DemixMatrix, np.ndarray]


@dataclass(frozen=True)
class SeparationReport:
    corr_soi: float
    sinr_gain_db: float
    kurtosis_out: Tuple[float, float]
    ber: Optional[float] = None


@dataclass(frozen=True)
class EyeDiagram:
    """2D (phase, amplitude) histogram of a signal folded modulo the symbol period"""
    symbol_period_s: float
    phase_bins: int
    amplitude_bins: int
    histogram: np.ndarray = field(repr=False)
    amplitude_limit: float = 1.0

    @property
    def total(self) -> int:
        return int(self.histogram.sum())

    def amplitude_centers(self) -> np.ndarray:
        edges = np.linspace(-self.amplitude_limit, self.amplitude_limit, self.amplitude_bins + 1)
        return 0.5 * (edges[:-1] + edges[1:])

    def phase_centers(self) -> np.ndarray:
        edges = np.linspace(0.0, 1.0, self.phase_bins + 1)
        return 0.5 * (edges[:-1] + edges[1:])

    def mid_band_fraction(self, band: float = EYE_MID_BAND) -> float:
        """
        Smallest fraction of a phase column's mass lying in the mid-amplitude
        band (|amplitude| < band × limit), i.e. at the best sampling phase.
        """
        mid = np.abs(self.amplitude_centers()) < band * self.amplitude_limit
        columns = self.histogram.sum(axis=1)
        used = columns > 0
        if not np.any(used):
            return 0.0
        fractions = self.histogram[used][:, mid].sum(axis=1) / columns[used]
        return float(fractions.min())

    def to_frame(self) -> pd.DataFrame:
        """Dense long-form grid: one row per (phase, amplitude) cell"""
        phase, amplitude = np.meshgrid(self.phase_centers(), self.amplitude_centers(), indexing='ij')
        return pd.DataFrame({
            'phase': phase.ravel(),
            'amplitude': amplitude.ravel(),
            'count': self.histogram.ravel().astype(np.int64),
        })


def _samples(x: Signal) -> np.ndarray:
    if isinstance(x, Waveform):
        return x.samples
    return np.asarray(x, dtype=float).reshape(-1)


def _check_geometry(a: Signal, b: Signal):
    if isinstance(a, Waveform) and isinstance(b, Waveform):
        if not a.same_geometry(b):
            raise ConfigError("signals must share sample rate, start time and length")
    elif _samples(a).size != _samples(b).size:
        raise ConfigError("signals must have the same length")


def _matrix(m: Matrix) -> np.ndarray:
    if isinstance(m, (MixingMatrix, DemixMatrix)):
        return m.as_array()
    return np.asarray(m, dtype=float)


def angle_error(estimate_deg: float, reference_deg: float, period_deg: float) -> float:
    """Absolute angular error with both angles folded modulo ``period_deg``"""
    d = fold_angle(estimate_deg - reference_deg, period_deg)
    return min(d, period_deg - d)


def cap_db(value: float, cap: float = SINR_CAP_DB) -> float:
    if math.isnan(value):
        return value
    return max(-cap, min(cap, value))


def correlation_metric(est: Signal, truth: Signal) -> float:
    """|Pearson correlation| after mean removal"""
    _check_geometry(est, truth)
    a = _samples(est) - np.mean(_samples(est))
    b = _samples(truth) - np.mean(_samples(truth))
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise DegenerateSignal("correlation of a zero-variance signal")
    return float(min(1.0, abs(np.dot(a / na, b / nb))))


def _snr_db(signal_power: float, leak_power: float) -> float:
    if leak_power == 0:
        return math.inf if signal_power > 0 else math.nan
    if signal_power == 0:
        return -math.inf
    return 10.0 * math.log10(signal_power / leak_power)


def sinr_gain(s: Signal, i: Signal, A: Matrix, W: DemixMatrix) -> float:
    """
    SINR improvement in dB of the SOI output row of W·A over the best input
    channel. Perfect interference rejection returns +inf.
    """
    p_s = float(np.mean(_samples(s) ** 2))
    p_i = float(np.mean(_samples(i) ** 2))
    a = _matrix(A)
    g = W.as_array() @ a
    row = W.soi_channel - 1
    after = _snr_db(g[row, 0] ** 2 * p_s, g[row, 1] ** 2 * p_i)
    before = max(_snr_db(a[c, 0] ** 2 * p_s, a[c, 1] ** 2 * p_i) for c in range(2))
    if math.isinf(after) and math.isinf(before) and (after > 0) == (before > 0):
        return 0.0
    return after - before


def eye_diagram(
    data: Union[Waveform, SampleSet],
    symbol_period_s: float,
    phase_bins: int = 32,
    amplitude_bins: int = 64,
    channel: int = 1
) -> EyeDiagram:
    """Fold samples modulo the symbol period (by timestamp) into a 2D histogram"""
    if not symbol_period_s > 0:
        raise ConfigError(f"symbol period must be positive, got {symbol_period_s}")
    if phase_bins < 1 or amplitude_bins < 1:
        raise ConfigError("eye diagram needs at least one bin per axis")
    if isinstance(data, Waveform):
        times, values = data.times(), data.samples
    else:
        times, values = data.times_s, (data.channel(channel) if len(data) else np.empty(0))
    if values.size == 0:
        raise EmptySampleSet("eye diagram of an empty signal")

    phase = np.mod(times, symbol_period_s) / symbol_period_s
    phase = np.clip(phase, 0.0, np.nextafter(1.0, 0.0))
    limit = float(np.max(np.abs(values)))
    if limit == 0:
        limit = 1.0
    histogram, _, _ = np.histogram2d(
        phase, values, bins=[phase_bins, amplitude_bins], range=[[0.0, 1.0], [-limit, limit]]
    )
    return EyeDiagram(symbol_period_s, phase_bins, amplitude_bins, histogram.astype(np.int64), limit)


def ber(est: Waveform, true_bits: Sequence[int], bit_rate: float) -> float:
    """Mid-bit threshold detection against the true bits, best of both polarities"""
    bits = np.asarray(true_bits, dtype=int).reshape(-1)
    if bits.size == 0:
        raise EmptySampleSet("no reference bits")
    sps = samples_per_symbol(bit_rate, est.sample_rate_hz)
    if len(est) < bits.size * sps:
        raise ConfigError(f"estimate holds {len(est)} samples, {bits.size * sps} needed")
    mid = np.arange(bits.size) * sps + sps // 2
    decisions = (est.samples[mid] - np.mean(est.samples)) > 0
    errors = int(np.count_nonzero(decisions != bits.astype(bool)))
    return min(errors, bits.size - errors) / bits.size


def cov_oracle(A: Matrix, var_s: float, var_i: float) -> Tuple[float, float, float]:
    """Exact (q1, q2, θ0) of the 2nd-order curve for C = A·diag(var_s, var_i)·Aᵀ"""
    if not (var_s > 0 and var_i > 0):
        raise ConfigError("source variances must be positive")
    a = _matrix(A)
    c = a @ np.diag([var_s, var_i]) @ a.T
    q1 = 0.5 * (c[0, 0] + c[1, 1])
    q2 = 0.5 * math.hypot(c[0, 0] - c[1, 1], 2.0 * c[0, 1])
    theta0 = fold_angle(0.5 * math.degrees(math.atan2(2.0 * c[0, 1], c[0, 0] - c[1, 1])), 180.0)
    return float(q1), float(q2), theta0


def oracle_second_fit(A: Matrix, var_s: float, var_i: float) -> SecondMomentFit:
    q1, q2, theta0 = cov_oracle(A, var_s, var_i)
    return SecondMomentFit(q1, q2, theta0, 0.0, q2 < DEGENERATE_PCA_RATIO * abs(q1))


def phi0_oracle(A: Matrix, var_s: float, var_i: float) -> float:
    """Residual rotation left after oracle whitening: the SOI column angle mod 90°"""
    pca = build_pca(oracle_second_fit(A, var_s, var_i))
    m = pca.whitening @ _matrix(A)
    return fold_angle(math.degrees(math.atan2(m[1, 0], m[0, 0])), 90.0)


def kurt_curve_params(kappa1: float, kappa2: float) -> Tuple[float, float, float]:
    """(p1, p2, p3) of the 4th-moment curve of two unit-variance whitened sources"""
    p1 = 3.0 * (kappa1 + kappa2) / 8.0 + 0.75
    p2 = (kappa1 - kappa2) / 2.0
    p3 = (kappa1 + kappa2 - 6.0) / 8.0
    return p1, p2, p3


def kurt_curve_oracle(kappa1: float, kappa2: float, alpha_deg, phi_deg):
    """E[(cosψ·s1 + sinψ·s2)⁴] with ψ = φ − α for unit-variance independent sources"""
    psi = np.radians(np.asarray(phi_deg, dtype=float) - np.asarray(alpha_deg, dtype=float))
    c2, s2 = np.cos(psi) ** 2, np.sin(psi) ** 2
    value = kappa1 * c2 ** 2 + kappa2 * s2 ** 2 + 6.0 * c2 * s2
    return float(value) if np.ndim(value) == 0 else value


def second_moment_theory(A: Matrix, var_s: float, var_i: float, angles_deg) -> np.ndarray:
    """Exact 2nd moment of the projection of A·S at each angle"""
    q1, q2, theta0 = cov_oracle(A, var_s, var_i)
    return q1 + q2 * np.cos(2.0 * np.radians(np.asarray(angles_deg, dtype=float) - theta0))


def fourth_moment_theory(
    M: Matrix,
    var_s: float,
    var_i: float,
    kappa_s: float,
    kappa_i: float,
    angles_deg
) -> np.ndarray:
    """
    Exact 4th moment of the projection of M·S for independent zero-mean
    sources, where M is the overall source-to-channel map (e.g. whitening·A).
    """
    m = _matrix(M)
    rad = np.radians(np.asarray(angles_deg, dtype=float))
    g1 = np.cos(rad) * m[0, 0] + np.sin(rad) * m[1, 0]
    g2 = np.cos(rad) * m[0, 1] + np.sin(rad) * m[1, 1]
    return (g1 ** 4 * kappa_s * var_s ** 2 + g2 ** 4 * kappa_i * var_i ** 2
            + 6.0 * g1 ** 2 * g2 ** 2 * var_s * var_i)


def _grid_solve(curve: MomentCurve, candidates: np.ndarray, shifted: Sequence[int], free: Sequence[int] = ()):
    """
    Closed-form amplitudes for every candidate angle. ``shifted`` harmonics use
    cos(h·(angle − candidate)); ``free`` harmonics keep their own cos/sin pair.
    """
    delta = np.radians(curve.angles_deg[None, :] - candidates[:, None])
    rad = np.broadcast_to(np.radians(curve.angles_deg)[None, :], delta.shape)
    columns = [np.ones_like(delta)]
    for h in free:
        columns += [np.cos(h * rad), np.sin(h * rad)]
    columns += [np.cos(h * delta) for h in shifted]
    design = np.stack(columns, axis=-1)
    coef = np.linalg.pinv(design) @ curve.moments
    residual = curve.moments[None, :] - np.einsum('gnk,gk->gn', design, coef)
    return coef, np.sum(residual ** 2, axis=1)


def _pick(residual_ss: np.ndarray, valid: np.ndarray, scale: float) -> int:
    ss = np.where(valid, residual_ss, np.inf)
    best = np.min(ss)
    tied = np.flatnonzero(ss <= best + 1e-12 * scale)
    return int(tied[0])


def grid_fit_oracle(curve, order: int, step_deg: float = GRID_STEP_DEG, axis: str = "min"):
    """
    Brute-force fit: for every candidate θ0 / φ0 on a ``step_deg`` grid solve
    the amplitudes in closed form and keep the residual-minimizing angle.
    Ties go to the lowest angle.
    """
    if order not in (2, 4):
        raise ConfigError(f"order must be 2 or 4, got {order}")
    curve = as_curve(curve, order)
    if distinct_angle_count(curve.angles_deg) < MIN_ANGLES[order]:
        raise InsufficientAngles(
            f"order-{order} grid fit needs at least {MIN_ANGLES[order]} distinct angles"
        )
    period = 180.0 if order == 2 else 90.0
    candidates = np.arange(int(round(period / step_deg))) * step_deg
    scale = float(np.sum(curve.moments ** 2)) + 1e-300
    n = len(curve)

    if order == 2:
        coef, ss = _grid_solve(curve, candidates, (2,))
        tol = 1e-12 * np.abs(coef[:, 0])
        best = _pick(ss, coef[:, 1] >= -tol, scale)
        q1, q2 = (float(v) for v in coef[best])
        return SecondMomentFit(q1, q2, float(candidates[best]), math.sqrt(ss[best] / n),
                               q2 < DEGENERATE_PCA_RATIO * abs(q1))

    # same model as the least-squares fit: free 2φ pair, 4φ term shifted by φ0
    coef, ss = _grid_solve(curve, candidates, (4,), free=(2,))
    tol = 1e-12 * np.abs(coef[:, 0])
    valid = coef[:, 3] <= tol if axis == "min" else coef[:, 3] >= -tol
    best = _pick(ss, valid, scale)
    p1, b1, b2, p3 = (float(v) for v in coef[best])
    c2, s2 = cos_sin_deg(2.0 * float(candidates[best]))
    p2 = b1 * c2 + b2 * s2
    return FourthMomentFit(p1, p2, p3, float(candidates[best]), math.sqrt(ss[best] / n),
                           abs(p3) >= FLAT_KURTOSIS_RATIO * abs(p1) and abs(p3) > 0, axis)
