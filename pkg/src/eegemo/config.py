"""Run configuration: one YAML (or JSON) file drives every command."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .dataset import MidpointPolicy
from .errors import DataIOError, ValidationError
from .evaluation import Mode
from .features import FAMILIES
from .spectral import SpectralConfig
from .svm import SvmConfig
from .synth import SynthSpec

SELECTORS = (*FAMILIES, "all", "each+all")

DEFAULTS = {
    "input": {"manifest": None, "synth": None},
    "spectral": SpectralConfig().to_dict(),
    "features": "each+all",
    "svm": SvmConfig().to_dict(),
    "evaluation": {
        "k": 10,
        "seed": 0,
        "mode": Mode.PAPER_FAITHFUL.value,
        "midpoint_policy": MidpointPolicy.REJECT.value,
        "jobs": 1,
    },
    "output_dir": "out",
}


@dataclass(frozen=True)
class EvaluationSettings:
    k: int = 10
    seed: int = 0
    mode: Mode = Mode.PAPER_FAITHFUL
    midpoint_policy: MidpointPolicy = MidpointPolicy.REJECT
    jobs: int = 1

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise ValidationError(f"evaluation.k must be an integer >= 2, got {self.k}")
        if self.jobs < 1:
            raise ValidationError("evaluation.jobs must be at least 1")
        try:
            object.__setattr__(self, "mode", Mode(self.mode))
            object.__setattr__(self, "midpoint_policy", MidpointPolicy(self.midpoint_policy))
        except ValueError as exc:
            raise ValidationError(str(exc)) from None


@dataclass(frozen=True)
class RunConfig:
    manifest: Path | None = None
    synth: SynthSpec | None = None
    spectral: SpectralConfig = SpectralConfig()
    features: str = "each+all"
    svm: SvmConfig = SvmConfig()
    evaluation: EvaluationSettings = EvaluationSettings()
    output_dir: Path = Path("out")
    raw: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.features not in SELECTORS:
            raise ValidationError(
                f"features selector {self.features!r} not one of {', '.join(SELECTORS)}"
            )

    @property
    def families(self) -> list[str]:
        """Families to evaluate, in report row order."""
        if self.features == "each+all":
            return [*FAMILIES, "all"]
        return [self.features]

    def echo(self) -> dict:
        """Resolved settings, enough to rerun the command exactly.

        ``jobs`` is left out: it changes wall time, never output bytes.
        """
        return {
            "input": {
                "manifest": str(self.manifest) if self.manifest else None,
                "synth": self.synth.to_dict() if self.synth else None,
            },
            "spectral": self.spectral.to_dict(),
            "features": self.features,
            "svm": self.svm.to_dict(),
            "evaluation": {
                "k": self.evaluation.k,
                "seed": self.evaluation.seed,
                "mode": self.evaluation.mode.value,
                "midpoint_policy": self.evaluation.midpoint_policy.value,
            },
            "output_dir": str(self.output_dir),
        }


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def apply_override(doc: dict, assignment: str) -> dict:
    """Apply ``dotted.key=value``; the value is parsed as YAML."""
    if "=" not in assignment:
        raise ValidationError(f"override {assignment!r} must look like key.path=value")
    path, text = assignment.split("=", 1)
    keys = path.strip().split(".")
    node = doc
    for key in keys[:-1]:
        if node.get(key) is None:
            node[key] = {}
        node = node[key]
        if not isinstance(node, dict):
            raise ValidationError(f"override {path!r} descends into a non-mapping")
    node[keys[-1]] = yaml.safe_load(text)
    return doc


def _unknown_keys(doc, reference, prefix=""):
    for key, value in doc.items():
        if key not in reference:
            yield prefix + key
        elif isinstance(value, dict) and isinstance(reference[key], dict) and key != "synth":
            yield from _unknown_keys(value, reference[key], prefix + key + ".")


def build_config(doc: dict | None = None, base_dir=".") -> RunConfig:
    doc = _merge(DEFAULTS, doc or {})
    unknown = list(_unknown_keys(doc, DEFAULTS))
    if unknown:
        raise ValidationError(f"unknown configuration keys: {', '.join(unknown)}")
    base_dir = Path(base_dir)
    manifest = doc["input"]["manifest"]
    synth = doc["input"]["synth"]
    try:
        return RunConfig(
            manifest=(base_dir / manifest) if manifest else None,
            synth=SynthSpec.from_dict(synth) if synth is not None else None,
            spectral=SpectralConfig(**doc["spectral"]),
            features=str(doc["features"]),
            svm=SvmConfig(**doc["svm"]),
            evaluation=EvaluationSettings(**doc["evaluation"]),
            output_dir=base_dir / doc["output_dir"],
            raw=doc,
        )
    except TypeError as exc:
        raise ValidationError(f"bad configuration: {exc}") from None


def load_config(path=None, overrides=()) -> RunConfig:
    """Read a config file (YAML or JSON) and apply ``key=value`` overrides.

    Relative paths inside the file resolve against the file's directory.
    """
    doc = {}
    base_dir = Path(".")
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise DataIOError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        try:
            doc = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ValidationError(f"{path}: invalid YAML: {exc}") from None
        if not isinstance(doc, dict):
            raise ValidationError(f"{path}: top level must be a mapping")
        base_dir = path.parent
    for assignment in overrides:
        apply_override(doc, assignment)
    return build_config(doc, base_dir)


def dump_echo(cfg: RunConfig) -> str:
    return json.dumps(cfg.echo(), indent=2, sort_keys=True) + "\n"
