"""Command-line driver: ``eegemo {synth,extract,evaluate} --config run.yaml``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path

from . import __version__
from .config import SELECTORS, RunConfig, dump_echo, load_config
from .core import load_session_file, write_session
from .dataset import MidpointRating, build_dataset, label_from_sam
from .errors import ConvergenceError, DataIOError, EegError, ValidationError
from .evaluation import cross_validate, format_table
from .features import FAMILY_TITLES, FEATURE_NAMES, extract_features, family_slice
from .synth import generate_session

log = logging.getLogger("eegemo")

EXIT_OK = 0
EXIT_VALIDATION = 3
EXIT_CONVERGENCE = 4
EXIT_IO = 5


def prepare_output_dir(path: Path) -> Path:
    """Create ``path`` if needed and confirm it is a writable directory."""
    if path.exists() and not path.is_dir():
        raise DataIOError(f"output path {path} exists and is not a directory")
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataIOError(f"cannot create output directory {path}: {exc.strerror or exc}") from exc
    if not os.access(path, os.W_OK | os.X_OK):
        raise DataIOError(f"output directory {path} is not writable")
    return path


def _write(path: Path, text: str):
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc.strerror or exc}") from exc


@contextmanager
def stage(name: str):
    """Tag errors escaping the block with the pipeline stage name."""
    try:
        yield
    except EegError as exc:
        if not hasattr(exc, "stage"):
            exc.stage = name
        raise


def _session(cfg: RunConfig):
    with stage("load"):
        if cfg.manifest is not None:
            return load_session_file(cfg.manifest)
        if cfg.synth is not None:
            return generate_session(cfg.synth)
        raise ValidationError("config needs input.manifest or input.synth")


def _feature_items(cfg: RunConfig):
    session = _session(cfg)
    if not session:
        raise ValidationError("session is empty; nothing to process")
    with stage("feature extraction"):
        return [(rec.recording_id, extract_features(rec, cfg.spectral), rating)
                for rec, rating in session]


def cmd_synth(cfg: RunConfig) -> Path:
    if cfg.synth is None:
        raise ValidationError("synth command needs input.synth in the config")
    out = prepare_output_dir(cfg.output_dir)
    manifest = write_session(generate_session(cfg.synth), out)
    _write(out / "run_config.json", dump_echo(cfg))
    return manifest


def feature_table(items, columns: slice, midpoint_policy) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["recording_id", *FEATURE_NAMES[columns], "label"])
    for recording_id, features, rating in items:
        try:
            label = label_from_sam(rating, midpoint_policy).title
        except MidpointRating as exc:
            log.warning("%s: excluded from labeling (%s)", recording_id, exc)
            label = ""
        writer.writerow([recording_id, *map(repr, features.as_array()[columns].tolist()), label])
    return buf.getvalue()


def cmd_extract(cfg: RunConfig) -> Path:
    out = prepare_output_dir(cfg.output_dir)
    items = _feature_items(cfg)
    selector = "all" if cfg.features == "each+all" else cfg.features
    table = feature_table(items, family_slice(selector), cfg.evaluation.midpoint_policy)
    path = out / "features.csv"
    _write(path, table)
    _write(out / "run_config.json", dump_echo(cfg))
    return path


def cmd_evaluate(cfg: RunConfig) -> list:
    out = prepare_output_dir(cfg.output_dir)
    items = _feature_items(cfg)
    with stage("labeling"):
        ds = build_dataset(items, cfg.evaluation.midpoint_policy)
    for warning in ds.warnings:
        log.warning("%s: %s", warning["recording_id"], warning["reason"])
    ev = cfg.evaluation
    reports = []
    for family in cfg.families:
        with stage(f"cross-validation ({FAMILY_TITLES[family]})"):
            reports.append(cross_validate(
                ds, ev.k, cfg.svm, ev.seed, ev.mode,
                columns=family_slice(family),
                feature_set=FAMILY_TITLES[family],
                jobs=ev.jobs,
            ))
    echo = cfg.echo()
    echo.pop("output_dir")
    doc = {"config": echo, "mode": ev.mode.value, "reports": [r.to_dict() for r in reports]}
    _write(out / "report.json", json.dumps(doc, indent=2) + "\n")
    _write(out / "report.txt", f"mode: {ev.mode.value}\n" + format_table(reports))
    _write(out / "run_config.json", dump_echo(cfg))
    return reports


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eegemo", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("synth", "write a synthetic session (recordings + manifest)"),
        ("extract", "write the feature table for a session"),
        ("evaluate", "cross-validate the SVM and write reports"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-c", "--config", type=Path, help="YAML or JSON run configuration")
        p.add_argument("-o", "--output-dir", help="override output_dir")
        p.add_argument("--manifest", help="override input.manifest")
        p.add_argument("--seed", type=int,
                       help="override evaluation.seed (input.synth.seed for synth)")
        p.add_argument("--features", choices=SELECTORS, help="override features")
        p.add_argument("--mode", choices=("paper_faithful", "leakage_safe"),
                       help="override evaluation.mode")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override any config key (dotted path)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _overrides(args) -> list[str]:
    out = []
    seed_key = "input.synth.seed" if args.command == "synth" else "evaluation.seed"
    for flag, key in (("output_dir", "output_dir"), ("manifest", "input.manifest"),
                      ("seed", seed_key), ("features", "features"),
                      ("mode", "evaluation.mode")):
        value = getattr(args, flag)
        if value is not None:
            if flag in ("output_dir", "manifest"):
                value = Path(value).resolve()  # flags are relative to the cwd
            out.append(f"{key}={value}")
    return out + list(args.overrides)


def _where(args, exc) -> str:
    return f"{args.command} [{exc.stage}]" if hasattr(exc, "stage") else args.command


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.command == "synth":
            print(cmd_synth(cfg))
        elif args.command == "extract":
            print(cmd_extract(cfg))
        else:
            reports = cmd_evaluate(cfg)
            sys.stdout.write(f"mode: {cfg.evaluation.mode.value}\n" + format_table(reports))
    except ConvergenceError as exc:
        log.error("%s: training failed to converge: %s", _where(args, exc), exc)
        return EXIT_CONVERGENCE
    except DataIOError as exc:
        log.error("%s: %s", _where(args, exc), exc)
        return EXIT_IO
    except ValidationError as exc:
        log.error("%s: %s", _where(args, exc), exc)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
