"""
Moment-curve estimation from gated two-channel samples

The second moment of cos(θ)x1 + sin(θ)x2 is q1 + q2·cos2(θ−θ0); the fourth
moment of whitened samples is p1 + p2·cos2(φ−φ0) + p3·cos4(φ−φ0). Both are
fitted by linear least squares in the cos/sin harmonics (harmonic
regression), which is closed form and exact on noiseless curves.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, EmptySampleSet, InsufficientAngles
from .sampler import SampleSet

logger = logging.getLogger(__name__)

DEFAULT_THETA_GRID = (0.0, 45.0, 90.0, 135.0)
DEFAULT_PHI_GRID = tuple(22.5 * k for k in range(8))

MIN_ANGLES = {2: 3, 4: 5}

# q2 below this fraction of q1: isotropic mixture, θ0 unreliable
DEGENERATE_PCA_RATIO = 1e-3
# 4φ amplitude below this fraction of p1: flat kurtosis curve
FLAT_KURTOSIS_RATIO = 1e-3
# residual-based floor: amplitude < 5·residual_rms/√(angle count)
RESIDUAL_FLOOR_FACTOR = 5.0
# sampling-noise floor in standard errors of the 4φ amplitude
IDENTIFIABILITY_Z = 3.5


def fold_angle(angle_deg: float, period_deg: float) -> float:
    """Fold an angle into [0, period)"""
    folded = math.fmod(angle_deg, period_deg)
    if folded < 0:
        folded += period_deg
    if folded >= period_deg:
        folded -= period_deg
    return folded


def cos_sin_deg(angle_deg: float) -> Tuple[float, float]:
    """
    cos and sin of an angle in degrees; exact at multiples of 90° and exactly
    sign-flipped under a 180° shift.
    """
    half_turns = math.floor(angle_deg / 180.0)
    reduced = angle_deg - 180.0 * half_turns
    exact = {0.0: (1.0, 0.0), 90.0: (0.0, 1.0)}
    if reduced in exact:
        c, s = exact[reduced]
    else:
        rad = math.radians(reduced)
        c, s = math.cos(rad), math.sin(rad)
    if half_turns % 2:
        return -c, -s
    return c, s


@dataclass(frozen=True)
class AngleGrid:
    """Projection angles in degrees, each in [0°, 180°)"""
    angles_deg: Tuple[float, ...]

    def __post_init__(self):
        angles = tuple(float(a) for a in self.angles_deg)
        for a in angles:
            if not (math.isfinite(a) and 0.0 <= a < 180.0):
                raise ConfigError(f"angle {a} outside [0, 180)")
        object.__setattr__(self, 'angles_deg', angles)

    def __len__(self) -> int:
        return len(self.angles_deg)

    @property
    def distinct_count(self) -> int:
        return distinct_angle_count(self.angles_deg)

    def require(self, order: int):
        needed = MIN_ANGLES[order]
        if self.distinct_count < needed:
            raise InsufficientAngles(
                f"order-{order} fit needs at least {needed} distinct angles (mod 180°), "
                f"got {self.distinct_count}"
            )


def distinct_angle_count(angles: Iterable[float]) -> int:
    folded = {round(fold_angle(a, 180.0), 9) % 180.0 for a in angles}
    return len(folded)


@dataclass(frozen=True)
class MomentCurve:
    """
    Moment of the projection at each angle.

    ``covariance`` is the covariance matrix of the per-angle estimates when
    they come from samples (None for synthetic curves).
    """
    angles_deg: np.ndarray
    moments: np.ndarray
    order: int
    covariance: Optional[np.ndarray] = field(default=None, repr=False)

    def pairs(self):
        return list(zip(self.angles_deg.tolist(), self.moments.tolist()))

    def __len__(self) -> int:
        return self.angles_deg.size


@dataclass(frozen=True)
class SecondMomentFit:
    q1: float
    q2: float
    theta0_deg: float
    residual_rms: float
    degenerate: bool = False

    def evaluate(self, angles_deg) -> np.ndarray:
        angles = np.radians(np.asarray(angles_deg, dtype=float) - self.theta0_deg)
        return self.q1 + self.q2 * np.cos(2.0 * angles)


@dataclass(frozen=True)
class FourthMomentFit:
    p1: float
    p2: float
    p3: float
    phi0_deg: float
    residual_rms: float
    identifiable: bool
    axis: str = "min"

    def evaluate(self, angles_deg) -> np.ndarray:
        angles = np.radians(np.asarray(angles_deg, dtype=float) - self.phi0_deg)
        return self.p1 + self.p2 * np.cos(2.0 * angles) + self.p3 * np.cos(4.0 * angles)


def project(s: SampleSet, theta_deg: float) -> np.ndarray:
    """cos(θ)·x1 + sin(θ)·x2"""
    if s.n_channels != 2:
        raise ConfigError(f"projection needs two channels, got {s.n_channels}")
    c, sn = cos_sin_deg(theta_deg)
    return c * s.values[0] + sn * s.values[1]


def _moment(x, power: int) -> float:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise EmptySampleSet("moment of an empty sequence")
    return float(np.mean(x ** power))


def second_moment(x) -> float:
    """Time average of x²"""
    return _moment(x, 2)


def fourth_moment(x) -> float:
    """Time average of x⁴"""
    return _moment(x, 4)


def moment_curve(s: SampleSet, grid: AngleGrid, order: int) -> MomentCurve:
    """Moment of the projection at each grid angle, in grid order"""
    if order not in MIN_ANGLES:
        raise ConfigError(f"moment order must be 2 or 4, got {order}")
    grid.require(order)
    if len(s) == 0:
        raise EmptySampleSet("moment curve of an empty sample set")

    powers = np.vstack([project(s, a) ** order for a in grid.angles_deg])
    moments = powers.mean(axis=1)
    covariance = None
    if len(s) > 1:
        covariance = np.atleast_2d(np.cov(powers)) / len(s)
    return MomentCurve(np.asarray(grid.angles_deg, dtype=float), moments, order, covariance)


def as_curve(curve: Union[MomentCurve, Sequence[Tuple[float, float]]], order: int) -> MomentCurve:
    if isinstance(curve, MomentCurve):
        return curve
    pairs = np.asarray(list(curve), dtype=float).reshape(-1, 2)
    return MomentCurve(pairs[:, 0], pairs[:, 1], order)


def _harmonic_design(angles_deg: np.ndarray, harmonics: Sequence[int]) -> np.ndarray:
    rad = np.radians(angles_deg)
    columns = [np.ones_like(rad)]
    for h in harmonics:
        columns.append(np.cos(h * rad))
        columns.append(np.sin(h * rad))
    return np.column_stack(columns)


def _solve(curve: MomentCurve, harmonics: Sequence[int]):
    needed = 1 + 2 * len(harmonics)
    if distinct_angle_count(curve.angles_deg) < needed:
        raise InsufficientAngles(
            f"fit needs at least {needed} distinct angles (mod 180°), "
            f"got {distinct_angle_count(curve.angles_deg)}"
        )
    design = _harmonic_design(curve.angles_deg, harmonics)
    if np.linalg.matrix_rank(design) < needed:
        raise InsufficientAngles("rank-deficient angle design")
    coef, *_ = np.linalg.lstsq(design, curve.moments, rcond=None)
    residual = curve.moments - design @ coef
    residual_rms = float(np.sqrt(np.mean(residual ** 2)))
    return coef, residual_rms, design


def fit_second_moment(curve) -> SecondMomentFit:
    """Fit q1 + q2·cos2(θ−θ0) through a 2nd-order moment curve"""
    curve = as_curve(curve, 2)
    (a0, a1, a2), residual_rms, _ = _solve(curve, (2,))
    q1 = float(a0)
    q2 = float(math.hypot(a1, a2))
    theta0 = fold_angle(0.5 * math.degrees(math.atan2(a2, a1)), 180.0)
    degenerate = q2 < DEGENERATE_PCA_RATIO * abs(q1)
    if degenerate:
        logger.warning("Second-moment curve is nearly flat (q2/q1=%.3g); θ0 is unreliable",
                       q2 / q1 if q1 else float('nan'))
    logger.debug("2nd-order fit: q1=%.6g q2=%.6g θ0=%.4f°", q1, q2, theta0)
    return SecondMomentFit(q1, q2, theta0, residual_rms, degenerate)


def fit_fourth_moment(curve, axis: str = "min") -> FourthMomentFit:
    """
    Fit p1 + p2·cos2(φ−φ0) + p3·cos4(φ−φ0) through a 4th-order moment curve.

    The five harmonic coefficients are fitted without tying the 2φ and 4φ
    phases together; φ0 comes from the 4φ term and p2 is the projection of the
    2φ term onto it. With ``axis="min"`` φ0 marks the kurtosis-minimizing axis
    (p3 ≤ 0, sub-Gaussian sources); ``axis="max"`` marks the maximizing axis.
    """
    if axis not in ("min", "max"):
        raise ConfigError(f"axis must be 'min' or 'max', got {axis!r}")
    curve = as_curve(curve, 4)
    coef, residual_rms, design = _solve(curve, (2, 4))
    b0, b1, b2, b3, b4 = (float(c) for c in coef)

    amplitude = math.hypot(b3, b4)
    phi4 = 0.25 * math.degrees(math.atan2(b4, b3))
    if axis == "min":
        p3 = -amplitude
        phi0 = fold_angle(phi4 + 45.0, 90.0)
    else:
        p3 = amplitude
        phi0 = fold_angle(phi4, 90.0)
    c2, s2 = cos_sin_deg(2.0 * phi0)
    p2 = b1 * c2 + b2 * s2

    n_angles = distinct_angle_count(curve.angles_deg)
    floor = max(
        RESIDUAL_FLOOR_FACTOR * residual_rms / math.sqrt(n_angles),
        FLAT_KURTOSIS_RATIO * abs(b0),
    )
    if curve.covariance is not None:
        pinv = np.linalg.pinv(design)
        coef_cov = pinv @ curve.covariance @ pinv.T
        sigma = math.sqrt(max(0.0, 0.5 * (coef_cov[3, 3] + coef_cov[4, 4])))
        floor = max(floor, IDENTIFIABILITY_Z * sigma)
    identifiable = amplitude > 0 and amplitude >= floor
    if not identifiable:
        logger.warning("Fourth-moment curve is flat (4φ amplitude %.3g < %.3g); ICA unidentifiable",
                       amplitude, floor)
    logger.debug("4th-order fit: p1=%.6g p2=%.6g p3=%.6g φ0=%.4f°", b0, p2, p3, phi0)
    return FourthMomentFit(b0, p2, p3, phi0, residual_rms, identifiable, axis)


def eval_second_moment(fit: SecondMomentFit, angles_deg) -> np.ndarray:
    return fit.evaluate(angles_deg)


def eval_fourth_moment(fit: FourthMomentFit, angles_deg) -> np.ndarray:
    return fit.evaluate(angles_deg)
