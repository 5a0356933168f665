"""
Exception hierarchy for the sub-Nyquist separation pipeline
"""
from typing import Optional


class SeparationError(Exception):
    """Base class for every error raised by the separation pipeline"""

    exit_code = 1

    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.stage = stage

    def __str__(self) -> str:
        if self.stage:
            return f"[{self.stage}] {self.message}"
        return self.message


class ConfigError(SeparationError):
    """Invalid configuration, geometry mismatch or violated precondition"""


class IoError(SeparationError):
    """Output directory or file could not be written"""


class DegenerateSignal(SeparationError):
    """Signal with zero RMS / zero variance where a scale is required"""


class EmptySampleSet(SeparationError):
    """No samples available (no pulse inside the waveform, empty sequence)"""


class InsufficientAngles(SeparationError):
    """Angle grid too small or rank deficient for the requested fit"""


class SingularMatrix(SeparationError):
    """Mixing or de-mixing matrix is numerically singular"""


class DegenerateCovariance(SeparationError):
    """Second principal component has a nonpositive variance estimate"""

    exit_code = 2


class IcaUnidentifiable(SeparationError):
    """Fourth-moment curve is too flat to locate the independent axes"""

    exit_code = 2
