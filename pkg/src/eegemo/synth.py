"""Seeded synthetic sessions with controllable band asymmetry and correlation.

Each channel is a sum of one amplitude-modulated sinusoid per band plus
white noise.  Within a symmetric pair the right channel's tone amplitude is
``sqrt(ratio)`` times the left one, so band powers keep the requested
right/left ratio.  The amplitude envelopes of the two channels share a slow
random component whose weight sets the correlation of their windowed band
powers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    CLIP_SECONDS,
    LABELS,
    SYMMETRIC_PAIRS,
    ClipId,
    EegRecording,
    EmotionLabel,
    SamRating,
)
from .errors import ValidationError
from .spectral import BAND_NAMES

N_PAIRS = len(SYMMETRIC_PAIRS)
N_BANDS = len(BAND_NAMES)

# left-channel tone amplitude per band, microvolts
BAND_AMPLITUDES = (20.0, 12.0, 10.0, 6.0, 3.0)
# integer tone frequencies kept clear of band edges so Hann leakage stays in-band
TONE_CHOICES = ((2,), (5, 6), (10, 11), tuple(range(16, 28)), tuple(range(33, 42)))
ENVELOPE_DEPTH = 0.4
ENVELOPE_TONES = 6


def _grid(value):
    arr = np.broadcast_to(np.asarray(value, dtype=np.float64), (N_PAIRS, N_BANDS)).copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ClassProfile:
    """Targets per (pair, band): right/left power ratio and power correlation."""

    ratios: np.ndarray
    correlations: np.ndarray

    def __post_init__(self):
        ratios = _grid(self.ratios)
        corr = _grid(self.correlations)
        if not np.isfinite(ratios).all() or (ratios <= 0).any():
            raise ValidationError("infeasible profile: power ratios must be positive and finite")
        if not np.isfinite(corr).all() or (np.abs(corr) > 1).any():
            raise ValidationError("infeasible profile: correlation targets must lie in [-1, 1]")
        object.__setattr__(self, "ratios", ratios)
        object.__setattr__(self, "correlations", corr)

    def to_dict(self) -> dict:
        return {"ratios": self.ratios.tolist(), "correlations": self.correlations.tolist()}


def _profile(ratios_by_band, corr):
    return ClassProfile([ratios_by_band, ratios_by_band], corr)


DEFAULT_PROFILES = {
    #                              Delta Theta Alpha Beta Gamma
    EmotionLabel.HAPPY: _profile([1.2, 1.2, 3.0, 1.5, 1.2], 0.7),
    EmotionLabel.RELAXED: _profile([0.8, 0.6, 0.33, 0.8, 0.8], 0.7),
    EmotionLabel.SAD: _profile([1.3, 1.0, 1.0, 1.0, 1.0], -0.5),
    EmotionLabel.ANGRY: _profile([1.0, 1.0, 0.7, 2.5, 2.5], 0.2),
}


@dataclass(frozen=True)
class SynthSpec:
    participants: int = 21
    sample_rate: float = 256.0
    clip_seconds: dict = field(default_factory=lambda: {c.value: s for c, s in CLIP_SECONDS.items()})
    class_profiles: dict = field(default_factory=lambda: dict(DEFAULT_PROFILES))
    noise_level: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.participants < 1:
            raise ValidationError("participants must be at least 1")
        if not self.sample_rate > 0:
            raise ValidationError("sample_rate must be positive")
        clips = {ClipId(k).value: float(v) for k, v in self.clip_seconds.items()}
        if not clips or any(v <= 2 for v in clips.values()):
            raise ValidationError("clip durations must exceed 2 s")
        object.__setattr__(self, "clip_seconds", clips)
        profiles = {}
        for key, prof in self.class_profiles.items():
            label = key if isinstance(key, EmotionLabel) else EmotionLabel.parse(key)
            if not isinstance(prof, ClassProfile):
                prof = ClassProfile(prof["ratios"], prof["correlations"])
            profiles[label] = prof
        missing = [l.title for l in LABELS if l not in profiles]
        if missing:
            raise ValidationError(f"class profiles missing for {', '.join(missing)}")
        object.__setattr__(self, "class_profiles", profiles)
        if self.noise_level < 0:
            raise ValidationError("noise_level must be non-negative")

    def to_dict(self) -> dict:
        return {
            "participants": self.participants,
            "sample_rate": self.sample_rate,
            "clip_seconds": dict(self.clip_seconds),
            "class_profiles": {l.title: self.class_profiles[l].to_dict() for l in LABELS},
            "noise_level": self.noise_level,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d) -> "SynthSpec":
        d = dict(d)
        profiles = dict(DEFAULT_PROFILES)
        for key, prof in (d.pop("class_profiles", None) or {}).items():
            profiles[EmotionLabel.parse(key)] = ClassProfile(prof["ratios"], prof["correlations"])
        return cls(class_profiles=profiles, **d)


def _smooth_process(t, rng):
    """Zero-mean, unit-variance slow random signal (0.05-0.5 Hz)."""
    freqs = rng.uniform(0.05, 0.5, ENVELOPE_TONES)
    phases = rng.uniform(0, 2 * np.pi, ENVELOPE_TONES)
    return np.sqrt(2.0 / ENVELOPE_TONES) * np.sin(2 * np.pi * freqs * t[:, None] + phases).sum(axis=1)


def _quadrant_rating(label: EmotionLabel, rng) -> SamRating:
    positive_valence = label in (EmotionLabel.HAPPY, EmotionLabel.RELAXED)
    positive_arousal = label in (EmotionLabel.HAPPY, EmotionLabel.ANGRY)

    def draw(positive):
        return int(rng.integers(6, 10) if positive else rng.integers(1, 5))

    return SamRating(draw(positive_valence), draw(positive_arousal))


def generate_recording(profile: ClassProfile, n_samples: int, sample_rate: float,
                       noise_level: float, rng, gain: float = 1.0) -> np.ndarray:
    """Sample matrix (n_samples, 4) realizing ``profile``."""
    t = np.arange(n_samples) / sample_rate
    out = np.zeros((n_samples, 4))
    for b in range(N_BANDS):
        freq = float(rng.choice(TONE_CHOICES[b]))
        for p, (left, right) in enumerate(SYMMETRIC_PAIRS):
            rho = profile.correlations[p, b]
            shared = _smooth_process(t, rng)
            amp_left = gain * BAND_AMPLITUDES[b]
            amp_right = amp_left * np.sqrt(profile.ratios[p, b])
            for electrode, amp, sign in ((left, amp_left, 1.0), (right, amp_right, np.sign(rho) or 1.0)):
                own = _smooth_process(t, rng)
                mix = np.sqrt(abs(rho)) * sign * shared + np.sqrt(1 - abs(rho)) * own
                envelope = np.maximum(1.0 + ENVELOPE_DEPTH * mix, 0.0)
                phase = rng.uniform(0, 2 * np.pi)
                out[:, int(electrode)] += amp * envelope * np.sin(2 * np.pi * freq * t + phase)
    if noise_level > 0:
        rms = np.sqrt(np.mean(out**2))
        out += rng.normal(0.0, noise_level * rms, out.shape)
    return out


def generate_session(spec: SynthSpec = SynthSpec()) -> list[tuple[EegRecording, SamRating]]:
    """Recordings for every participant and clip, classes assigned round-robin."""
    pairs = []
    clips = list(spec.clip_seconds.items())
    for p in range(spec.participants):
        participant = f"p{p + 1:02d}"
        gain = np.random.default_rng([spec.seed, p]).uniform(0.8, 1.2)
        for c, (clip, seconds) in enumerate(clips):
            rng = np.random.default_rng([spec.seed, p, c])
            label = LABELS[(p * len(clips) + c) % len(LABELS)]
            samples = generate_recording(
                spec.class_profiles[label],
                int(round(seconds * spec.sample_rate)),
                spec.sample_rate,
                spec.noise_level,
                rng,
                gain,
            )
            rec = EegRecording(f"{participant}_{clip}", participant, ClipId(clip),
                               spec.sample_rate, samples)
            pairs.append((rec, _quadrant_rating(label, rng)))
    return pairs
