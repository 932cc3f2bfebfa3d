"""Emotion recognition from four-channel EEG band-power asymmetry features."""

__version__ = "0.1.0"
