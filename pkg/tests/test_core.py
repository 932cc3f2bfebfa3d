import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from eegemo.core import (
    CHANNEL_NAMES,
    SYMMETRIC_PAIRS,
    EegRecording,
    Electrode,
    EmotionLabel,
    ManifestEntry,
    SamRating,
    format_manifest,
    format_recording,
    load_session,
    load_session_file,
    parse_recording,
    write_session,
)
from eegemo.errors import DataIOError, ParseError, ValidationError

META = dict(recording_id="r1", participant_id="p01", clip_id="cold_air", sample_rate=256)


def csv_text(rows, header="TP9,AF7,AF8,TP10"):
    return header + "\n" + "\n".join(",".join(map(str, r)) for r in rows) + "\n"


def test_electrode_order_and_pairs():
    assert CHANNEL_NAMES == ("TP9", "AF7", "AF8", "TP10")
    assert SYMMETRIC_PAIRS == ((Electrode.TP9, Electrode.TP10), (Electrode.AF7, Electrode.AF8))


def test_label_indices():
    assert [int(l) for l in EmotionLabel] == [0, 1, 2, 3]
    assert [l.title for l in EmotionLabel] == ["Happy", "Relaxed", "Sad", "Angry"]


def test_parse_minimal_recording():
    rows = np.arange(512 * 4, dtype=float).reshape(512, 4)
    rec = parse_recording(csv_text(rows.tolist()), **META)
    assert rec.n_samples == 512
    assert rec.sample_rate == 256.0
    np.testing.assert_array_equal(rec.samples, rows)


def test_parse_preserves_row_and_column_order():
    rng = np.random.default_rng(0)
    rows = rng.normal(size=(600, 4))
    # columns deliberately shuffled in the file
    header = "AF8,TP9,TP10,AF7"
    text = header + "\n" + "\n".join(
        ",".join(repr(v) for v in (r[2], r[0], r[3], r[1])) for r in rows.tolist()
    )
    rec = parse_recording(text, **META)
    np.testing.assert_array_equal(rec.samples, rows)


def test_missing_column_named():
    text = "TP9,AF7,TP10\n" + "\n".join("1,2,3" for _ in range(600))
    with pytest.raises(ParseError, match="AF8") as info:
        parse_recording(text, **META)
    assert info.value.column == "AF8"


def test_nan_cell_located():
    rows = [[1.0, 2.0, 3.0, 4.0] for _ in range(600)]
    rows[6][0] = "NaN"
    with pytest.raises(ParseError) as info:
        parse_recording(csv_text(rows), **META)
    assert info.value.row == 7
    assert info.value.column == "TP9"
    assert "row 7" in str(info.value) and "TP9" in str(info.value)


def test_non_numeric_cell_located():
    rows = [[1.0, 2.0, 3.0, 4.0] for _ in range(600)]
    rows[10][2] = "abc"
    with pytest.raises(ParseError) as info:
        parse_recording(csv_text(rows), **META)
    assert (info.value.row, info.value.column) == (11, "AF8")


def test_short_recording_rejected():
    rows = [[0.0] * 4 for _ in range(511)]
    with pytest.raises(ParseError, match="2 s"):
        parse_recording(csv_text(rows), **META)


def test_timestamp_column_ignored():
    text = "timestamps,TP9,AF7,AF8,TP10\n" + "\n".join(f"{i * 0.1},1,2,3,4" for i in range(512))
    rec = parse_recording(text, **META)
    np.testing.assert_array_equal(rec.samples[0], [1, 2, 3, 4])


def test_metadata_required_and_consistent():
    rows = [[0.0] * 4 for _ in range(512)]
    with pytest.raises(ParseError, match="sample_rate"):
        parse_recording(csv_text(rows), recording_id="r", participant_id="p", clip_id="hot_air")
    text = "# sample_rate: 128\n" + csv_text(rows)
    with pytest.raises(ParseError, match="conflict"):
        parse_recording(text, **META)


def test_recording_is_immutable():
    rec = EegRecording("r", "p", "hot_air", 256, np.zeros((512, 4)))
    with pytest.raises(ValueError):
        rec.samples[0, 0] = 1.0


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (520, 4), elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_round_trip_bit_identical(samples):
    rec = EegRecording("rt", "p07", "hot_air", 260.0, samples)
    back = parse_recording(format_recording(rec))
    assert back.samples.tobytes() == rec.samples.tobytes()
    assert (back.recording_id, back.participant_id, back.clip_id, back.sample_rate) == (
        "rt", "p07", rec.clip_id, 260.0)


def test_sam_bounds():
    SamRating(1, 9)
    for bad in [(0, 5), (5, 10), (1.5, 3)]:
        with pytest.raises(ValidationError):
            SamRating(*bad)


def _session_files(tmp_path, n_participants):
    pairs = []
    for p in range(n_participants):
        for c, clip in enumerate(("cold_air", "hot_air")):
            rec = EegRecording(f"p{p:02d}_{clip}", f"p{p:02d}", clip, 256.0,
                               np.full((512, 4), float(p * 2 + c)))
            pairs.append((rec, SamRating(7, 3)))
    return write_session(pairs, tmp_path)


def test_load_session_42_entries(tmp_path):
    manifest = _session_files(tmp_path, 21)
    pairs = load_session_file(manifest)
    assert len(pairs) == 42
    assert [r.recording_id for r, _ in pairs][:2] == ["p00_cold_air", "p00_hot_air"]
    assert pairs[5][0].samples[0, 0] == 5.0
    assert pairs[0][1] == SamRating(7, 3)


def test_empty_manifest():
    assert load_session("") == []
    assert load_session('{"recordings": []}') == []


def test_manifest_range_error(tmp_path):
    entry = ManifestEntry("x.csv", "r", "p", "cold_air", 256.0, 7, 7).to_dict()
    entry["valence"] = 0
    with pytest.raises(ValidationError, match="valence"):
        load_session(json.dumps({"recordings": [entry]}), tmp_path)


def test_manifest_duplicate_id(tmp_path):
    e = ManifestEntry("x.csv", "r", "p", "cold_air", 256.0, 7, 7)
    with pytest.raises(ValidationError, match="duplicate"):
        load_session(format_manifest([e, e]), tmp_path)


def test_manifest_unreadable_path(tmp_path):
    e = ManifestEntry("missing.csv", "r", "p", "cold_air", 256.0, 7, 7)
    with pytest.raises(DataIOError, match="missing.csv"):
        load_session(format_manifest([e]), tmp_path)
