"""Hemispheric asymmetry and band-correlation features.

Layout of the 30-slot vector: ``[rasm | dasm | corr]``, each family
pair-major and band-minor with pairs (TP9, TP10) then (AF7, AF8) and
bands Delta..Gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import SYMMETRIC_PAIRS, EegRecording
from .errors import ValidationError
from .spectral import (
    BAND_NAMES,
    BandPowerMatrix,
    BandPowerSeries,
    SpectralConfig,
    band_power_matrix,
    band_power_series,
)

RASM_EPS = 1e-12
FAMILIES = ("rasm", "dasm", "corr")
FAMILY_TITLES = {"rasm": "RASM", "dasm": "DASM", "corr": "Correlation", "all": "All"}
SLOTS_PER_FAMILY = len(SYMMETRIC_PAIRS) * len(BAND_NAMES)


def _slot_names(family):
    return [
        f"{family}_{left.name}_{right.name}_{band}"
        for left, right in SYMMETRIC_PAIRS
        for band in BAND_NAMES
    ]


FEATURE_NAMES = tuple(name for fam in FAMILIES for name in _slot_names(fam))


def family_slice(family: str) -> slice:
    """Column range of a feature family; ``all`` selects every slot."""
    if family == "all":
        return slice(0, len(FEATURE_NAMES))
    try:
        i = FAMILIES.index(family)
    except ValueError:
        raise ValidationError(f"unknown feature family {family!r}") from None
    return slice(i * SLOTS_PER_FAMILY, (i + 1) * SLOTS_PER_FAMILY)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    rasm: np.ndarray
    dasm: np.ndarray
    corr: np.ndarray

    def __post_init__(self):
        for name in FAMILIES:
            arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
            if arr.shape != (SLOTS_PER_FAMILY,):
                raise ValidationError(f"{name} must have {SLOTS_PER_FAMILY} entries, got {arr.shape}")
            if not np.isfinite(arr).all():
                raise ValidationError(f"{name} contains non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if (self.rasm <= 0).any():
            raise ValidationError("RASM entries must be strictly positive")
        if (np.abs(self.corr) > 1).any():
            raise ValidationError("correlation entries must lie in [-1, 1]")

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.rasm, self.dasm, self.corr])

    @classmethod
    def from_array(cls, values) -> "FeatureVector":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (len(FEATURE_NAMES),):
            raise ValidationError(f"feature vector must have length 30, got {values.shape}")
        n = SLOTS_PER_FAMILY
        return cls(values[:n], values[n:2 * n], values[2 * n:])

    def __len__(self):
        return len(FEATURE_NAMES)


def _pair_powers(values: np.ndarray):
    """Right and left rows stacked in layout order: shape (pairs, bands, ...)."""
    right = np.stack([values[int(r)] for _, r in SYMMETRIC_PAIRS])
    left = np.stack([values[int(l)] for l, _ in SYMMETRIC_PAIRS])
    return right, left


def rasm(bp: BandPowerMatrix) -> np.ndarray:
    """Right/left power ratio per pair and band."""
    right, left = _pair_powers(bp.values)
    return (right / np.maximum(left, RASM_EPS)).reshape(-1)


def dasm(bp: BandPowerMatrix) -> np.ndarray:
    """Right minus left power per pair and band."""
    right, left = _pair_powers(bp.values)
    return (right - left).reshape(-1)


def _flat_floor(x: np.ndarray) -> float:
    return x.size * (1e-12 * float(np.abs(x).max())) ** 2


def pearson(a, b) -> float:
    """Pearson correlation; 0 when either input has zero variance."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError(f"pearson needs equal-length 1-D sequences, got {a.shape} and {b.shape}")
    if a.size < 2:
        raise ValidationError("pearson needs at least 2 values")
    da = a - a.mean()
    db = b - b.mean()
    saa = float(np.dot(da, da))
    sbb = float(np.dot(db, db))
    # spread at rounding level of the values counts as constant
    if saa <= _flat_floor(a) or sbb <= _flat_floor(b):
        return 0.0
    r = float(np.dot(da, db)) / math.sqrt(saa * sbb)
    return min(1.0, max(-1.0, r))


def band_correlation(series: BandPowerSeries) -> np.ndarray:
    """Correlation of left and right window band powers, per pair and band."""
    out = [
        pearson(series.series(left, band), series.series(right, band))
        for left, right in SYMMETRIC_PAIRS
        for band in range(len(BAND_NAMES))
    ]
    return np.array(out)


def extract_features(recording: EegRecording, cfg: SpectralConfig = SpectralConfig()
                     ) -> FeatureVector:
    bp = band_power_matrix(recording, cfg)
    return FeatureVector(rasm(bp), dasm(bp), band_correlation(band_power_series(recording, cfg)))
