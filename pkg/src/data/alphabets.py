"""
Source alphabets and their analytic moments
"""
import math
from typing import Dict, Any, Optional

import numpy as np


class SourceAlphabets:
    """Database of source level sets and their population moments"""

    SOURCES = {
        'nrz_binary': {
            'name': 'NRZ random binary',
            'levels': (-1.0, 1.0),
            'second_moment': 1.0,
            'fourth_moment': 1.0
        },
        'qam16_real': {
            'name': '16QAM real part',
            # unit variance: (1 + 9 + 1 + 9) / 4 / 5 = 1
            'levels': tuple(v / math.sqrt(5.0) for v in (-3.0, -1.0, 1.0, 3.0)),
            'second_moment': 1.0,
            # (1 + 81 + 1 + 81) / 4 / 25
            'fourth_moment': 1.64
        },
        'gaussian': {
            'name': 'Gaussian interference',
            'levels': None,
            'second_moment': 1.0,
            'fourth_moment': 3.0
        }
    }

    def get_source_info(self, kind: str) -> Optional[Dict[str, Any]]:
        """Get the alphabet record for a source kind"""
        return self.SOURCES.get(kind)

    def levels(self, kind: str) -> np.ndarray:
        """Level set of a discrete alphabet as an array"""
        info = self.SOURCES[kind]
        if info['levels'] is None:
            raise KeyError(f"{kind} has no discrete level set")
        return np.asarray(info['levels'], dtype=float)

    def kurtosis(self, kind: str) -> float:
        """Normalized fourth moment E[s^4] / E[s^2]^2 of a unit-variance source"""
        info = self.SOURCES[kind]
        return info['fourth_moment'] / info['second_moment'] ** 2
