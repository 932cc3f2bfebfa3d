"""Domain types and file ingestion for four-channel headband recordings.

Recording files are UTF-8 CSV with a header naming the channel columns
``TP9,AF7,AF8,TP10`` (any order, extra columns such as timestamps are
ignored).  Metadata may be given in a ``# key: value`` preamble before the
header, by the session manifest, or both; when both are present they must
agree.

Session manifests are JSON::

    {"recordings": [
        {"path": "recordings/p01_cold_air.csv", "recording_id": "p01_cold_air",
         "participant_id": "p01", "clip_id": "cold_air", "sample_rate": 256,
         "valence": 7, "arousal": 3}
    ]}

Relative paths resolve against the manifest's directory.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataIOError, ParseError, ValidationError


class Electrode(enum.IntEnum):
    """Headband electrode; the integer value is the column index."""

    TP9 = 0
    AF7 = 1
    AF8 = 2
    TP10 = 3


ELECTRODES = tuple(Electrode)
CHANNEL_NAMES = tuple(e.name for e in ELECTRODES)

# (left, right) hemispheric pairs, in feature layout order
SYMMETRIC_PAIRS = (
    (Electrode.TP9, Electrode.TP10),
    (Electrode.AF7, Electrode.AF8),
)


class ClipId(str, enum.Enum):
    COLD_AIR = "cold_air"
    HOT_AIR = "hot_air"


CLIP_SECONDS = {ClipId.COLD_AIR: 58.0, ClipId.HOT_AIR: 21.0}


class EmotionLabel(enum.IntEnum):
    HAPPY = 0
    RELAXED = 1
    SAD = 2
    ANGRY = 3

    @property
    def title(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, text: str) -> "EmotionLabel":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValidationError(f"unknown emotion label {text!r}") from None


LABELS = tuple(EmotionLabel)


@dataclass(frozen=True)
class SamRating:
    """9-point self-assessment manikin scores."""

    valence: int
    arousal: int

    def __post_init__(self):
        for name in ("valence", "arousal"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ValidationError(f"SAM {name} must be an integer, got {value!r}")
            if not 1 <= value <= 9:
                raise ValidationError(f"SAM {name} {value} outside 1-9")


@dataclass(frozen=True, eq=False)
class EegRecording:
    """One participant watching one clip.

    ``samples`` has shape (N, 4) in microvolts, columns in electrode order.
    The array is made read-only on construction.
    """

    recording_id: str
    participant_id: str
    clip_id: ClipId
    sample_rate: float
    samples: np.ndarray

    def __post_init__(self):
        if not self.recording_id:
            raise ValidationError("recording_id must be non-empty")
        object.__setattr__(self, "clip_id", ClipId(self.clip_id))
        rate = float(self.sample_rate)
        if not math.isfinite(rate) or rate <= 0:
            raise ValidationError(f"sample_rate must be positive, got {self.sample_rate!r}")
        object.__setattr__(self, "sample_rate", rate)
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[1] != len(ELECTRODES):
            raise ValidationError(
                f"samples must have shape (N, {len(ELECTRODES)}), got {samples.shape}"
            )
        if not np.isfinite(samples).all():
            row, col = np.argwhere(~np.isfinite(samples))[0]
            raise ParseError("non-finite sample", row=int(row) + 1, column=CHANNEL_NAMES[col])
        if samples.shape[0] < 2 * rate:
            raise ValidationError(
                f"recording {self.recording_id!r} has {samples.shape[0]} samples; "
                f"at least {math.ceil(2 * rate)} (2 s) required"
            )
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    def channel(self, electrode: Electrode) -> np.ndarray:
        return self.samples[:, int(electrode)]

    def with_samples(self, samples) -> "EegRecording":
        return EegRecording(
            self.recording_id, self.participant_id, self.clip_id, self.sample_rate, samples
        )


_META_KEYS = ("recording_id", "participant_id", "clip_id", "sample_rate")


def _coerce_meta(key, value):
    if key == "sample_rate":
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ValidationError(f"sample_rate {value!r} is not a number") from None
    if key == "clip_id":
        if isinstance(value, ClipId):
            return value
        try:
            return ClipId(str(value).strip())
        except ValueError:
            raise ValidationError(
                f"clip_id {value!r} not one of {[c.value for c in ClipId]}"
            ) from None
    return str(value).strip()


def parse_recording(csv_text: str, source=None, **metadata) -> EegRecording:
    """Parse a recording CSV.

    Keyword arguments supply metadata (``recording_id``, ``participant_id``,
    ``clip_id``, ``sample_rate``) not present in the preamble.
    """
    lines = csv_text.splitlines()
    meta = {}
    pos = 0
    while pos < len(lines) and (not lines[pos].strip() or lines[pos].lstrip().startswith("#")):
        body = lines[pos].lstrip().lstrip("#").strip()
        if ":" in body:
            key, value = (part.strip() for part in body.split(":", 1))
            if key in _META_KEYS:
                meta[key] = _coerce_meta(key, value)
        pos += 1

    for key, value in metadata.items():
        if key not in _META_KEYS:
            raise TypeError(f"unexpected metadata field {key!r}")
        if value is None:
            continue
        value = _coerce_meta(key, value)
        if key in meta and meta[key] != value:
            raise ParseError(
                f"metadata conflict for {key}: file says {meta[key]!r}, caller says {value!r}",
                source=source,
            )
        meta[key] = value
    missing = [k for k in _META_KEYS if k not in meta]
    if missing:
        raise ParseError(f"missing metadata: {', '.join(missing)}", source=source)

    if pos >= len(lines):
        raise ParseError("no header row", source=source)
    reader = csv.reader(io.StringIO("\n".join(lines[pos:])))
    header = [h.strip() for h in next(reader)]
    columns = []
    for name in CHANNEL_NAMES:
        if name not in header:
            raise ParseError(f"missing channel column {name}", column=name, source=source)
        columns.append(header.index(name))

    rows = []
    for row_no, cells in enumerate(reader, start=1):
        if not cells or all(not c.strip() for c in cells):
            continue
        if len(cells) != len(header):
            raise ParseError(
                f"expected {len(header)} cells, found {len(cells)}", row=row_no, source=source
            )
        values = []
        for name, idx in zip(CHANNEL_NAMES, columns):
            cell = cells[idx].strip()
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(
                    f"non-numeric value {cell!r}", row=row_no, column=name, source=source
                ) from None
            if not math.isfinite(value):
                raise ParseError(
                    f"non-finite value {cell!r}", row=row_no, column=name, source=source
                )
            values.append(value)
        rows.append(values)

    samples = np.array(rows, dtype=np.float64).reshape(-1, len(CHANNEL_NAMES))
    if samples.shape[0] < 2 * meta["sample_rate"]:
        raise ParseError(
            f"{samples.shape[0]} rows; at least 2 s at {meta['sample_rate']:g} samples/s "
            f"({math.ceil(2 * meta['sample_rate'])} rows) required",
            source=source,
        )
    return EegRecording(samples=samples, **meta)


def format_recording(recording: EegRecording) -> str:
    """Serialize to the CSV format with a metadata preamble.

    Floats are written with ``repr`` so re-parsing is bit-exact.
    """
    out = [
        f"# recording_id: {recording.recording_id}",
        f"# participant_id: {recording.participant_id}",
        f"# clip_id: {recording.clip_id.value}",
        f"# sample_rate: {recording.sample_rate!r}",
        ",".join(CHANNEL_NAMES),
    ]
    out.extend(",".join(map(repr, row)) for row in recording.samples.tolist())
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    recording_id: str
    participant_id: str
    clip_id: ClipId
    sample_rate: float
    valence: int
    arousal: int

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "recording_id": self.recording_id,
            "participant_id": self.participant_id,
            "clip_id": ClipId(self.clip_id).value,
            "sample_rate": self.sample_rate,
            "valence": self.valence,
            "arousal": self.arousal,
        }


def format_manifest(entries) -> str:
    return json.dumps({"recordings": [e.to_dict() for e in entries]}, indent=2) + "\n"


def parse_manifest(manifest_text: str, source=None) -> list[ManifestEntry]:
    if not manifest_text.strip():
        return []
    try:
        doc = json.loads(manifest_text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", source=source) from None
    items = doc.get("recordings") if isinstance(doc, dict) else doc
    if not isinstance(items, list):
        raise ParseError("manifest must contain a 'recordings' list", source=source)

    entries = []
    seen = set()
    for i, item in enumerate(items, start=1):
        where = f"{source or 'manifest'} entry {i}"
        if not isinstance(item, dict):
            raise ParseError(f"{where}: expected an object")
        missing = [k for k in ("path", *_META_KEYS, "valence", "arousal") if k not in item]
        if missing:
            raise ParseError(f"{where}: missing fields {', '.join(missing)}")
        try:
            SamRating(item["valence"], item["arousal"])
        except ValidationError as exc:
            raise ValidationError(f"{where}: {exc}") from None
        rid = str(item["recording_id"])
        if rid in seen:
            raise ValidationError(f"{where}: duplicate recording_id {rid!r}")
        seen.add(rid)
        entries.append(
            ManifestEntry(
                path=str(item["path"]),
                recording_id=rid,
                participant_id=str(item["participant_id"]),
                clip_id=_coerce_meta("clip_id", item["clip_id"]),
                sample_rate=_coerce_meta("sample_rate", item["sample_rate"]),
                valence=int(item["valence"]),
                arousal=int(item["arousal"]),
            )
        )
    return entries


def load_session(manifest_text: str, base_dir=".") -> list[tuple[EegRecording, SamRating]]:
    """Parse every recording named by a manifest, in manifest order."""
    pairs = []
    for entry in parse_manifest(manifest_text):
        path = Path(base_dir) / entry.path
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise DataIOError(f"cannot read recording {path}: {exc.strerror or exc}") from exc
        rec = parse_recording(
            text,
            source=path,
            recording_id=entry.recording_id,
            participant_id=entry.participant_id,
            clip_id=entry.clip_id,
            sample_rate=entry.sample_rate,
        )
        pairs.append((rec, SamRating(entry.valence, entry.arousal)))
    return pairs


def load_session_file(path) -> list[tuple[EegRecording, SamRating]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot read manifest {path}: {exc.strerror or exc}") from exc
    return load_session(text, base_dir=path.parent)


def write_session(pairs, out_dir, recordings_subdir="recordings") -> Path:
    """Write recordings and a manifest under ``out_dir``; return the manifest path."""
    out_dir = Path(out_dir)
    rec_dir = out_dir / recordings_subdir
    entries = []
    try:
        rec_dir.mkdir(parents=True, exist_ok=True)
        for rec, rating in pairs:
            rel = f"{recordings_subdir}/{rec.recording_id}.csv"
            (out_dir / rel).write_text(format_recording(rec), encoding="utf-8")
            entries.append(ManifestEntry(rel, rec.recording_id, rec.participant_id,
                                         rec.clip_id, rec.sample_rate,
                                         rating.valence, rating.arousal))
        manifest = out_dir / "manifest.json"
        manifest.write_text(format_manifest(entries), encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot write session to {out_dir}: {exc.strerror or exc}") from exc
    return manifest
