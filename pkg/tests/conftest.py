import numpy as np
import pytest

from eegemo.core import EegRecording
from eegemo.features import extract_features
from eegemo.synth import SynthSpec, generate_session

FS = 256.0


def make_recording(columns, fs=FS, recording_id="r1", clip="cold_air"):
    """Recording from four 1-D sample arrays in TP9, AF7, AF8, TP10 order."""
    return EegRecording(recording_id, "p01", clip, fs, np.stack(columns, axis=1))


def tone(freq, seconds, fs=FS, amp=1.0, phase=0.0):
    t = np.arange(int(round(seconds * fs))) / fs
    return amp * np.sin(2 * np.pi * freq * t + phase)


@pytest.fixture(scope="session")
def default_session():
    return generate_session(SynthSpec())


@pytest.fixture(scope="session")
def default_items(default_session):
    return [(rec.recording_id, extract_features(rec), rating) for rec, rating in default_session]
