"""Welch power spectral density and canonical EEG band powers."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy import signal as sps

from .core import ELECTRODES, EegRecording
from .errors import ValidationError


class FrequencyBand(NamedTuple):
    name: str
    lo: float
    hi: float


BAND_NAMES = ("Delta", "Theta", "Alpha", "Beta", "Gamma")


def frequency_bands(gamma_hi: float = 44.0) -> tuple[FrequencyBand, ...]:
    """The five bands in index order.  Theta is widened to 8 Hz so the
    bands tile 1..gamma_hi without gaps."""
    if gamma_hi <= 30.0:
        raise ValidationError(f"gamma_hi must exceed 30 Hz, got {gamma_hi}")
    return (
        FrequencyBand("Delta", 1.0, 4.0),
        FrequencyBand("Theta", 4.0, 8.0),
        FrequencyBand("Alpha", 8.0, 13.0),
        FrequencyBand("Beta", 13.0, 30.0),
        FrequencyBand("Gamma", 30.0, float(gamma_hi)),
    )


BANDS = frequency_bands()


@dataclass(frozen=True)
class SpectralConfig:
    segment_length: int = 256
    overlap_fraction: float = 0.5
    window_seconds: float = 1.0
    hop_seconds: float = 0.5
    gamma_hi: float = 44.0

    def __post_init__(self):
        for name, kind in (("segment_length", int), ("overlap_fraction", float),
                           ("window_seconds", float), ("hop_seconds", float),
                           ("gamma_hi", float)):
            try:
                object.__setattr__(self, name, kind(getattr(self, name)))
            except (TypeError, ValueError):
                raise ValidationError(f"spectral.{name}: expected a number") from None
        _check_segment(self.segment_length, self.overlap_fraction)
        if not (self.window_seconds > 0 and self.hop_seconds > 0):
            raise ValidationError("window_seconds and hop_seconds must be positive")
        frequency_bands(self.gamma_hi)

    @property
    def bands(self) -> tuple[FrequencyBand, ...]:
        return frequency_bands(self.gamma_hi)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class PsdEstimate:
    frequencies: np.ndarray
    power_density: np.ndarray

    @property
    def nyquist(self) -> float:
        return float(self.frequencies[-1])

    def total_power(self) -> float:
        return float(np.trapezoid(self.power_density, self.frequencies))


@dataclass(frozen=True, eq=False)
class BandPowerMatrix:
    """Mean band power, shape (4 electrodes, 5 bands), microvolts squared."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(ELECTRODES), len(BAND_NAMES)):
            raise ValidationError(f"band power matrix must be 4x5, got {values.shape}")
        if not np.isfinite(values).all() or (values < 0).any():
            raise ValidationError("band powers must be finite and non-negative")
        object.__setattr__(self, "values", values)

    def power(self, electrode, band: int) -> float:
        return float(self.values[int(electrode), band])


@dataclass(frozen=True, eq=False)
class BandPowerSeries:
    """Per-window band powers, shape (4 electrodes, 5 bands, W windows)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3 or values.shape[:2] != (len(ELECTRODES), len(BAND_NAMES)):
            raise ValidationError(f"band power series must be 4x5xW, got {values.shape}")
        if values.shape[2] < 2:
            raise ValidationError("band power series need at least 2 windows")
        if not np.isfinite(values).all() or (values < 0).any():
            raise ValidationError("band powers must be finite and non-negative")
        object.__setattr__(self, "values", values)

    @property
    def n_windows(self) -> int:
        return self.values.shape[2]

    def series(self, electrode, band: int) -> np.ndarray:
        return self.values[int(electrode), band]


def _check_segment(segment_length, overlap_fraction):
    if segment_length < 2 or segment_length & (segment_length - 1):
        raise ValidationError(f"segment_length must be a power of two, got {segment_length}")
    if not 0 <= overlap_fraction < 1:
        raise ValidationError(f"overlap_fraction must lie in [0, 1), got {overlap_fraction}")


def _welch(x: np.ndarray, sample_rate, segment_length, overlap_fraction):
    """Welch along the last axis; ``x`` may be batched."""
    _check_segment(segment_length, overlap_fraction)
    if x.shape[-1] < segment_length:
        raise ValidationError(
            f"signal of {x.shape[-1]} samples is shorter than one segment ({segment_length})"
        )
    if not np.isfinite(x).all():
        raise ValidationError("signal contains non-finite samples")
    freqs, pxx = sps.welch(
        x,
        fs=sample_rate,
        window="hann",
        nperseg=segment_length,
        noverlap=int(segment_length * overlap_fraction),
        detrend=False,
        scaling="density",
        return_onesided=True,
        axis=-1,
    )
    # float error only; density is non-negative by construction
    return freqs, np.maximum(pxx, 0.0)


def welch_psd(x, sample_rate: float, segment_length: int = 256,
              overlap_fraction: float = 0.5) -> PsdEstimate:
    """Averaged Hann-windowed periodogram, one-sided density in uV^2/Hz."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError("welch_psd expects a 1-D signal")
    freqs, pxx = _welch(x, sample_rate, segment_length, overlap_fraction)
    return PsdEstimate(freqs, pxx)


def _interp_last(freqs: np.ndarray, flat: np.ndarray, f: float) -> np.ndarray:
    j = min(max(int(np.searchsorted(freqs, f, side="right")) - 1, 0), len(freqs) - 2)
    t = (f - freqs[j]) / (freqs[j + 1] - freqs[j])
    return (1.0 - t) * flat[:, j] + t * flat[:, j + 1]


def _band_integral(freqs: np.ndarray, pxx: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Integral of the piecewise-linear PSD between lo and hi (last axis)."""
    if lo < 0 or hi > freqs[-1] + 1e-9 or hi <= lo:
        raise ValidationError(
            f"band [{lo}, {hi}] Hz outside [0, {freqs[-1]:g}] Hz (Nyquist)"
        )
    flat = pxx.reshape(-1, pxx.shape[-1])
    inner = (freqs > lo) & (freqs < hi)
    grid = np.concatenate(([lo], freqs[inner], [hi]))
    vals = np.concatenate(
        [_interp_last(freqs, flat, lo)[:, None], flat[:, inner],
         _interp_last(freqs, flat, hi)[:, None]],
        axis=1,
    )
    out = np.trapezoid(vals, grid, axis=-1)
    return np.maximum(out, 0.0).reshape(pxx.shape[:-1])


def band_power(psd: PsdEstimate, band: FrequencyBand) -> float:
    """Power inside ``band`` by trapezoidal integration of the density."""
    return float(_band_integral(psd.frequencies, psd.power_density, band.lo, band.hi))


def _all_bands(freqs, pxx, bands):
    return np.stack([_band_integral(freqs, pxx, b.lo, b.hi) for b in bands], axis=-1)


def band_power_matrix(recording: EegRecording, cfg: SpectralConfig = SpectralConfig()
                      ) -> BandPowerMatrix:
    freqs, pxx = _welch(recording.samples.T, recording.sample_rate,
                        cfg.segment_length, cfg.overlap_fraction)
    return BandPowerMatrix(_all_bands(freqs, pxx, cfg.bands))


def window_layout(n_samples: int, sample_rate: float, window_seconds: float,
                  hop_seconds: float) -> tuple[int, int, int]:
    """Return (window samples, hop samples, window count)."""
    win = int(round(window_seconds * sample_rate))
    hop = int(round(hop_seconds * sample_rate))
    if win < 2 or hop < 1:
        raise ValidationError("analysis window or hop shorter than one sample")
    if n_samples < win + hop:
        raise ValidationError(
            f"recording of {n_samples} samples too short for two {window_seconds:g} s windows "
            f"at {hop_seconds:g} s hop"
        )
    return win, hop, (n_samples - win) // hop + 1


def band_power_series(recording: EegRecording, cfg: SpectralConfig = SpectralConfig()
                      ) -> BandPowerSeries:
    win, hop, count = window_layout(
        recording.n_samples, recording.sample_rate, cfg.window_seconds, cfg.hop_seconds
    )
    # largest power of two that fits both the configured segment and the window
    segment = min(cfg.segment_length, 1 << int(math.log2(win)))
    starts = np.arange(count) * hop
    windows = recording.samples.T[:, starts[:, None] + np.arange(win)]  # (4, W, win)
    freqs, pxx = _welch(windows, recording.sample_rate, segment, cfg.overlap_fraction)
    powers = _all_bands(freqs, pxx, cfg.bands)  # (4, W, 5)
    return BandPowerSeries(np.transpose(powers, (0, 2, 1)))
