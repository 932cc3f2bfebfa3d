"""Valence/arousal quadrant labels, class balancing and stratified folds."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .core import LABELS, EmotionLabel, SamRating
from .errors import ValidationError
from .features import FeatureVector

SAM_MIDPOINT = 5


class MidpointPolicy(str, enum.Enum):
    REJECT = "reject"
    POSITIVE = "positive"
    NEGATIVE = "negative"


class MidpointRating(ValidationError):
    """A SAM score sits on the scale midpoint and the policy rejects it."""


_QUADRANTS = {
    (True, True): EmotionLabel.HAPPY,
    (True, False): EmotionLabel.RELAXED,
    (False, False): EmotionLabel.SAD,
    (False, True): EmotionLabel.ANGRY,
}


def _is_positive(value: int, axis: str, policy: MidpointPolicy) -> bool:
    if value != SAM_MIDPOINT:
        return value > SAM_MIDPOINT
    if policy is MidpointPolicy.POSITIVE:
        return True
    if policy is MidpointPolicy.NEGATIVE:
        return False
    raise MidpointRating(f"{axis} at scale midpoint {SAM_MIDPOINT}")


def label_from_sam(rating: SamRating, midpoint_policy=MidpointPolicy.REJECT) -> EmotionLabel:
    """Map a SAM rating to its valence/arousal quadrant.

    Raises :class:`MidpointRating` when a score equals 5 under the
    ``reject`` policy.
    """
    policy = MidpointPolicy(midpoint_policy)
    valence = _is_positive(rating.valence, "valence", policy)
    arousal = _is_positive(rating.arousal, "arousal", policy)
    return _QUADRANTS[valence, arousal]


@dataclass(frozen=True)
class LabeledInstance:
    features: FeatureVector
    label: EmotionLabel
    recording_id: str


@dataclass(frozen=True)
class Dataset:
    instances: tuple[LabeledInstance, ...]
    warnings: tuple[dict, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(self, "warnings", tuple(self.warnings))

    def __len__(self):
        return len(self.instances)

    @property
    def class_counts(self) -> dict[EmotionLabel, int]:
        counts = Counter(inst.label for inst in self.instances)
        return {label: counts.get(label, 0) for label in LABELS}

    @property
    def labels(self) -> np.ndarray:
        return np.array([int(inst.label) for inst in self.instances], dtype=np.int64)

    def matrix(self, columns: slice = slice(None)) -> np.ndarray:
        if not self.instances:
            return np.empty((0, 30))[:, columns]
        return np.stack([inst.features.as_array()[columns] for inst in self.instances])

    def subset(self, indices) -> "Dataset":
        return Dataset([self.instances[i] for i in indices], self.warnings)

    def missing_classes(self) -> list[EmotionLabel]:
        return [label for label, n in self.class_counts.items() if n == 0]


def build_dataset(items, midpoint_policy=MidpointPolicy.REJECT) -> Dataset:
    """Label ``(recording_id, FeatureVector, SamRating)`` triples.

    Midpoint ratings rejected by the policy are dropped and recorded as
    warning dicts on the returned dataset.
    """
    instances = []
    warnings = []
    for recording_id, features, rating in items:
        try:
            label = label_from_sam(rating, midpoint_policy)
        except MidpointRating as exc:
            warnings.append({
                "kind": "midpoint_excluded",
                "recording_id": recording_id,
                "valence": rating.valence,
                "arousal": rating.arousal,
                "reason": str(exc),
            })
            continue
        instances.append(LabeledInstance(features, label, recording_id))
    return Dataset(instances, warnings)


def balanced_counts(n: int) -> dict[EmotionLabel, int]:
    """Per-class target counts: floor(n/4), remainder to the earliest labels."""
    base, extra = divmod(n, len(LABELS))
    return {label: base + (1 if i < extra else 0) for i, label in enumerate(LABELS)}


def resample_balance(ds: Dataset, seed: int) -> Dataset:
    """Draw ``len(ds)`` instances with replacement at uniform class proportions.

    Output is grouped by class in label order.
    """
    n = len(ds)
    if n < len(LABELS):
        raise ValidationError(f"need at least {len(LABELS)} instances to balance, got {n}")
    missing = ds.missing_classes()
    if missing:
        raise ValidationError(
            f"cannot balance: class {', '.join(m.title for m in missing)} empty"
        )
    rng = np.random.default_rng(seed)
    labels = ds.labels
    chosen = []
    for label, target in balanced_counts(n).items():
        members = np.flatnonzero(labels == int(label))
        chosen.extend(members[rng.integers(0, members.size, size=target)].tolist())
    return ds.subset(chosen)


def stratified_folds(ds: Dataset, k: int, seed: int) -> list[np.ndarray]:
    """Split indices into ``k`` folds preserving class proportions.

    Each class is shuffled, the classes are concatenated in label order and
    positions are dealt round-robin, so fold sizes and per-class fold counts
    both differ by at most one.
    """
    n = len(ds)
    if k < 2:
        raise ValidationError(f"k must be at least 2, got {k}")
    if k > n:
        raise ValidationError(f"k={k} folds exceeds {n} instances")
    rng = np.random.default_rng(seed)
    labels = ds.labels
    order = np.concatenate([
        rng.permutation(np.flatnonzero(labels == int(label))) for label in LABELS
    ])
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.arange(n) % k
    return [np.flatnonzero(assignment == f) for f in range(k)]
