"""
Mixing model and de-mixing matrix assembly

X = A·S mixes the SOI and interference. The de-mixing matrix is built as
W = Vᵀ·Σ·Uᵀ: rotate into the principal-component basis, amplify the minor
component to equalize variances, then rotate onto the independent axes.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import stats

from .errors import ConfigError, DegenerateCovariance, IcaUnidentifiable, SingularMatrix
from .estimator import FourthMomentFit, SecondMomentFit, cos_sin_deg
from .sampler import SampleSet
from .signalgen import Waveform

logger = logging.getLogger(__name__)

SINGULAR_TOL = 1e-12
# relative gap below which q1 - q2 counts as zero
DEGENERATE_GAP = 1e-12
GAUSSIAN_KURTOSIS = 3.0


def rotation(angle_deg: float) -> np.ndarray:
    """[[cos, -sin], [sin, cos]] built from a single angle"""
    c, s = cos_sin_deg(angle_deg)
    return np.array([[c, -s], [s, c]])


def _check_nonsingular(matrix: np.ndarray, what: str):
    det = float(np.linalg.det(matrix))
    norm_sq = float(np.sum(matrix ** 2))
    if not all(np.isfinite(matrix.ravel())) or abs(det) <= SINGULAR_TOL * norm_sq:
        raise SingularMatrix(f"{what} is singular (det={det:.3g})")


@dataclass(frozen=True)
class MixingMatrix:
    """2×2 mixing matrix, row-major"""
    a11: float
    a12: float
    a21: float
    a22: float

    def __post_init__(self):
        _check_nonsingular(self.as_array(), "mixing matrix")

    @classmethod
    def from_rows(cls, rows) -> "MixingMatrix":
        m = np.asarray(rows, dtype=float)
        if m.shape != (2, 2):
            raise ConfigError(f"mixing matrix must be 2x2, got shape {m.shape}")
        return cls(*(float(v) for v in m.ravel()))

    def as_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]], dtype=float)

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.as_array()))

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.as_array()))


@dataclass(frozen=True)
class PcaModel:
    theta0_deg: float
    sigma_ratio: float

    @property
    def U(self) -> np.ndarray:
        return rotation(self.theta0_deg)

    @property
    def Sigma(self) -> np.ndarray:
        return np.diag([1.0, self.sigma_ratio])

    @property
    def whitening(self) -> np.ndarray:
        """Σ·Uᵀ"""
        return self.Sigma @ self.U.T


@dataclass(frozen=True)
class IcaModel:
    phi0_deg: float

    @property
    def V(self) -> np.ndarray:
        return rotation(self.phi0_deg)


@dataclass(frozen=True)
class DemixMatrix:
    """
    De-mixing matrix with the SOI output channel and the models it came from.

    ``method`` is "pca_ica" for the full chain, "pca_only" when the ICA stage
    was unidentifiable, "rank_one" when the covariance was degenerate and
    "direct" for matrices supplied from outside.
    """
    w11: float
    w12: float
    w21: float
    w22: float
    soi_channel: int = 1
    pca: Optional[PcaModel] = None
    ica: Optional[IcaModel] = None
    method: str = "direct"

    def __post_init__(self):
        if self.soi_channel not in (1, 2):
            raise ConfigError(f"soi_channel must be 1 or 2, got {self.soi_channel}")
        _check_nonsingular(self.as_array(), "de-mixing matrix")

    @classmethod
    def from_array(cls, matrix, soi_channel: int = 1, **provenance) -> "DemixMatrix":
        m = np.asarray(matrix, dtype=float)
        if m.shape != (2, 2):
            raise ConfigError(f"de-mixing matrix must be 2x2, got shape {m.shape}")
        return cls(*(float(v) for v in m.ravel()), soi_channel=soi_channel, **provenance)

    def as_array(self) -> np.ndarray:
        return np.array([[self.w11, self.w12], [self.w21, self.w22]], dtype=float)

    def with_soi_channel(self, soi_channel: int) -> "DemixMatrix":
        return DemixMatrix(self.w11, self.w12, self.w21, self.w22,
                           soi_channel, self.pca, self.ica, self.method)


def mix(A: MixingMatrix, s_soi: Waveform, s_int: Waveform) -> Tuple[Waveform, Waveform]:
    """x1 = a11·s_soi + a12·s_int ; x2 = a21·s_soi + a22·s_int"""
    if not s_soi.same_geometry(s_int):
        raise ConfigError("sources must share sample rate, start time and length")
    x1 = A.a11 * s_soi.samples + A.a12 * s_int.samples
    x2 = A.a21 * s_soi.samples + A.a22 * s_int.samples
    return s_soi.with_samples(x1), s_soi.with_samples(x2)


def build_pca(f: SecondMomentFit) -> PcaModel:
    """Rotation U(θ0) and Σ = diag(1, √((q1+q2)/(q1−q2)))"""
    gap = f.q1 - f.q2
    if not gap > DEGENERATE_GAP * abs(f.q1):
        raise DegenerateCovariance(
            f"second principal component variance q1-q2={gap:.3g} is not positive; "
            "more gated samples may help"
        )
    sigma_ratio = math.sqrt((f.q1 + f.q2) / gap)
    return PcaModel(f.theta0_deg, sigma_ratio)


def whiten(s: SampleSet, m: PcaModel) -> SampleSet:
    """X' = Σ·Uᵀ·X for every sample pair"""
    if s.n_channels != 2:
        raise ConfigError("whitening needs two channels")
    return s.with_values(m.whitening @ s.values)


def whiteness(s: SampleSet) -> float:
    """|off-diagonal covariance| / mean variance"""
    if s.n_channels != 2:
        raise ConfigError("whiteness needs two channels")
    cov = np.cov(s.values)
    mean_var = 0.5 * (cov[0, 0] + cov[1, 1])
    if mean_var == 0:
        return float('nan')
    return float(abs(cov[0, 1]) / mean_var)


def build_ica(f: FourthMomentFit) -> IcaModel:
    """Rotation V(φ0); refuses a flat kurtosis curve"""
    if not f.identifiable:
        raise IcaUnidentifiable(
            "fourth-moment curve has no identifiable 4φ component "
            "(sources may both be Gaussian)"
        )
    return IcaModel(f.phi0_deg)


def _sample_kurtosis(x: np.ndarray) -> float:
    with np.errstate(all='ignore'):
        value = stats.kurtosis(x, fisher=False, bias=True)
    return float(value)


def resolve_soi(demixed: SampleSet) -> int:
    """Channel whose kurtosis is farther from Gaussian; ties go to channel 1"""
    if demixed.n_channels != 2:
        raise ConfigError("SOI resolution needs two channels")
    distances = []
    for index in (1, 2):
        k = _sample_kurtosis(demixed.channel(index))
        distances.append(abs(k - GAUSSIAN_KURTOSIS) if math.isfinite(k) else 0.0)
    return 1 if distances[0] >= distances[1] else 2


def _with_resolved_soi(matrix: np.ndarray, samples: Optional[SampleSet], **provenance) -> DemixMatrix:
    soi_channel = 1
    if samples is not None:
        soi_channel = resolve_soi(samples.with_values(matrix @ samples.values))
    return DemixMatrix.from_array(matrix, soi_channel=soi_channel, **provenance)


def compose_demix(ica: IcaModel, pca: PcaModel, samples: Optional[SampleSet] = None) -> DemixMatrix:
    """
    W = Vᵀ·Σ·Uᵀ. When the gated mixture samples are given, the SOI channel is
    resolved on their demixed version.
    """
    matrix = ica.V.T @ pca.whitening
    return _with_resolved_soi(matrix, samples, pca=pca, ica=ica, method="pca_ica")


def pca_only_demix(pca: PcaModel, samples: Optional[SampleSet] = None) -> DemixMatrix:
    """Whitening alone, used when the ICA rotation cannot be identified"""
    return _with_resolved_soi(pca.whitening, samples, pca=pca, method="pca_only")


def rank_one_demix(theta0_deg: float) -> DemixMatrix:
    """Rotation onto the first principal component, used for degenerate covariance"""
    return DemixMatrix.from_array(rotation(theta0_deg).T, soi_channel=1,
                                  pca=PcaModel(theta0_deg, 1.0), method="rank_one")


def apply_demix(W: DemixMatrix, x1: Waveform, x2: Waveform) -> Tuple[Waveform, Waveform]:
    """Apply W sample by sample to the full-rate mixtures"""
    if not x1.same_geometry(x2):
        raise ConfigError("mixtures must share sample rate, start time and length")
    m = W.as_array()
    y1 = m[0, 0] * x1.samples + m[0, 1] * x2.samples
    y2 = m[1, 0] * x1.samples + m[1, 1] * x2.samples
    return x1.with_samples(y1), x1.with_samples(y2)


def soi_output(W: DemixMatrix, outputs: Tuple[Waveform, Waveform]) -> Waveform:
    """Pick the SOI estimate out of apply_demix's outputs"""
    return outputs[W.soi_channel - 1]
