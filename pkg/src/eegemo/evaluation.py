"""Cross-validation driver and classification metrics."""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .core import LABELS
from .dataset import Dataset, resample_balance, stratified_folds
from .errors import ValidationError
from .svm import SvmConfig, fit_multiclass

K = len(LABELS)


class Mode(str, enum.Enum):
    PAPER_FAITHFUL = "paper_faithful"
    LEAKAGE_SAFE = "leakage_safe"


def derive_seed(seed: int, *tags: int) -> int:
    return int(np.random.SeedSequence([seed, *tags]).generate_state(1)[0])


def round_half_up(value: float, places: int = 2) -> float:
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def accuracy_percent(correct: int, total: int) -> float:
    """Percentage to two decimals, half rounded up (32/42 -> 76.19)."""
    return round_half_up(100.0 * correct / total, 2)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are true classes, columns predicted."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != (K, K):
            raise ValidationError(f"confusion matrix must be {K}x{K}, got {counts.shape}")
        if (counts < 0).any() or not np.array_equal(counts, np.round(counts)):
            raise ValidationError("confusion counts must be non-negative integers")
        object.__setattr__(self, "counts", counts.astype(np.int64))

    @classmethod
    def from_labels(cls, truth, predicted) -> "ConfusionMatrix":
        counts = np.zeros((K, K), dtype=np.int64)
        np.add.at(counts, (np.asarray(truth), np.asarray(predicted)), 1)
        return cls(counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.counts))

    @property
    def accuracy(self) -> float:
        return self.correct / self.total


def kappa(cm: ConfusionMatrix) -> float:
    """Cohen's kappa; a degenerate chance term (p_e = 1) yields 1 or 0."""
    n = cm.total
    if n < 1:
        raise ValidationError("kappa of an empty confusion matrix")
    # integer form of (p_o - p_e) / (1 - p_e), scaled by N^2: one rounding only
    agree = int(np.trace(cm.counts))
    chance = int(cm.counts.sum(axis=1) @ cm.counts.sum(axis=0))
    if chance == n * n:
        return 1.0 if agree == n else 0.0
    return (n * agree - chance) / (n * n - chance)


def one_hot(labels) -> np.ndarray:
    return np.eye(K)[np.asarray(labels, dtype=np.int64)]


def error_metrics(dists, truths, baseline):
    """(MAE, RMSE, RAE %, RRSE %) of class distributions against one-hot truth.

    RAE and RRSE are relative to always predicting ``baseline``.
    """
    dists = np.atleast_2d(np.asarray(dists, dtype=np.float64))
    truths = np.atleast_2d(np.asarray(truths, dtype=np.float64))
    baseline = np.asarray(baseline, dtype=np.float64)
    if dists.shape != truths.shape or dists.shape[1] != K:
        raise ValidationError(f"distribution/truth shape mismatch: {dists.shape} vs {truths.shape}")
    if baseline.shape != (K,) or (baseline < 0).any() or abs(baseline.sum() - 1) > 1e-9:
        raise ValidationError("baseline must be a probability distribution over 4 classes")
    if np.abs(dists.sum(axis=1) - 1).max(initial=0) > 1e-9:
        raise ValidationError("every predicted distribution must sum to 1")

    n = dists.shape[0]
    diff = dists - truths
    base_diff = baseline - truths
    abs_err, sq_err = np.abs(diff).sum(), (diff**2).sum()
    base_abs, base_sq = np.abs(base_diff).sum(), (base_diff**2).sum()
    if base_abs == 0:
        raise ValidationError("baseline predicts every instance exactly; relative errors undefined")
    mae = abs_err / (n * K)
    rmse = np.sqrt(sq_err / (n * K))
    rae = 100.0 * abs_err / base_abs
    rrse = 100.0 * np.sqrt(sq_err / base_sq)
    return float(mae), float(rmse), float(rae), float(rrse)


def precision_recall_f(cm: ConfusionMatrix) -> dict:
    """Per-class precision/recall/F-measure plus support-weighted averages."""
    counts = cm.counts.astype(np.float64)
    tp = np.diag(counts)
    col = counts.sum(axis=0)
    row = counts.sum(axis=1)
    precision = np.divide(tp, col, out=np.zeros(K), where=col > 0)
    recall = np.divide(tp, row, out=np.zeros(K), where=row > 0)
    denom = precision + recall
    f = np.divide(2 * precision * recall, denom, out=np.zeros(K), where=denom > 0)
    weights = row / cm.total
    per_class = {
        label.title: {"precision": float(precision[k]), "recall": float(recall[k]),
                      "f_measure": float(f[k]), "support": int(row[k])}
        for k, label in enumerate(LABELS)
    }
    # support-weighted recall sums tp_k / N, which is accuracy; use that form
    weighted = {"precision": float(weights @ precision), "recall": float(tp.sum() / cm.total),
                "f_measure": float(weights @ f)}
    return {"per_class": per_class, "weighted": weighted}


@dataclass(frozen=True, eq=False)
class EvalReport:
    feature_set: str
    n_features: int
    confusion: ConfusionMatrix
    kappa: float
    mae: float
    rmse: float
    rae: float
    rrse: float
    per_class: dict
    weighted: dict
    config_echo: dict
    predictions: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def accuracy(self) -> float:
        return self.confusion.accuracy

    @property
    def accuracy_percent(self) -> float:
        return accuracy_percent(self.confusion.correct, self.confusion.total)

    def to_dict(self) -> dict:
        return {
            "feature_set": self.feature_set,
            "n_features": self.n_features,
            "n_instances": self.confusion.total,
            "accuracy": self.accuracy,
            "accuracy_percent": self.accuracy_percent,
            "kappa": self.kappa,
            "mae": self.mae,
            "rmse": self.rmse,
            "rae": self.rae,
            "rrse": self.rrse,
            "confusion": {
                "labels": [label.title for label in LABELS],
                "counts": self.confusion.counts.tolist(),
            },
            "per_class": self.per_class,
            "weighted": self.weighted,
            "config": self.config_echo,
            "warnings": self.warnings,
            "predictions": self.predictions,
        }


TABLE_COLUMNS = ("Feature set", "Accuracy(%)", "MAE", "RMSE", "RAE", "RRSE", "Kappa")


def format_table(reports) -> str:
    """Aligned plain-text table with one row per report."""
    rows = [TABLE_COLUMNS]
    for r in reports:
        rows.append((
            r.feature_set,
            f"{r.accuracy_percent:.2f}",
            f"{round_half_up(r.mae, 3):.3f}",
            f"{round_half_up(r.rmse, 3):.3f}",
            f"{round_half_up(r.rae, 2):.2f}",
            f"{round_half_up(r.rrse, 2):.2f}",
            f"{round_half_up(r.kappa, 3):.3f}",
        ))
    widths = [max(len(row[i]) for row in rows) for i in range(len(TABLE_COLUMNS))]
    lines = []
    for n, row in enumerate(rows):
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append(" | ".join(cells).rstrip())
        if n == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _class_priors(labels) -> np.ndarray:
    return np.bincount(labels, minlength=K) / len(labels)


def cross_validate(ds: Dataset, k: int = 10, svm_cfg: SvmConfig = SvmConfig(),
                   seed: int = 0, mode=Mode.PAPER_FAITHFUL,
                   columns: slice = slice(None), feature_set: str = "All",
                   jobs: int = 1) -> EvalReport:
    """Pooled k-fold evaluation of the one-vs-one SVM.

    ``paper_faithful`` balances the whole dataset once before folding;
    ``leakage_safe`` folds the original data and balances each training
    split only.
    """
    mode = Mode(mode)
    if mode is Mode.PAPER_FAITHFUL:
        data = resample_balance(ds, derive_seed(seed, 0))
    else:
        data = ds
    folds = stratified_folds(data, k, derive_seed(seed, 1))
    X = data.matrix(columns)
    labels = data.labels

    def run_fold(f):
        test = folds[f]
        train = np.setdiff1d(np.arange(len(data)), test)
        missing = [LABELS[c].title for c in range(K) if not (labels[train] == c).any()]
        if missing:
            raise ValidationError(
                f"fold {f}: training split lacks class {', '.join(missing)}; "
                f"use a smaller k or more instances per class"
            )
        if mode is Mode.LEAKAGE_SAFE:
            split = resample_balance(data.subset(train), derive_seed(seed, 2, f))
            Xtr, ytr = split.matrix(columns), split.labels
        else:
            Xtr, ytr = X[train], labels[train]
        model = fit_multiclass(Xtr, ytr, svm_cfg, derive_seed(seed, 3, f))
        pred, dist = model.predict_many(X[test])
        return test, pred, dist

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            outputs = list(pool.map(run_fold, range(len(folds))))
    else:
        outputs = [run_fold(f) for f in range(len(folds))]

    predicted = np.empty(len(data), dtype=np.int64)
    dists = np.empty((len(data), K))
    fold_of = np.empty(len(data), dtype=np.int64)
    for f, (test, pred, dist) in enumerate(outputs):
        predicted[test] = pred
        dists[test] = dist
        fold_of[test] = f

    cm = ConfusionMatrix.from_labels(labels, predicted)
    mae, rmse, rae, rrse = error_metrics(dists, one_hot(labels), _class_priors(labels))
    prf = precision_recall_f(cm)
    echo = {
        "k": k,
        "seed": seed,
        "mode": mode.value,
        "svm": svm_cfg.to_dict(),
        "class_counts_input": {l.title: n for l, n in ds.class_counts.items()},
        "class_counts_evaluated": {l.title: n for l, n in data.class_counts.items()},
    }
    predictions = [
        {"recording_id": inst.recording_id, "fold": int(fold_of[i]),
         "truth": LABELS[labels[i]].title, "predicted": LABELS[predicted[i]].title}
        for i, inst in enumerate(data.instances)
    ]
    warnings = list(ds.warnings)
    warnings.append({"kind": "resample_mode", "mode": mode.value})
    return EvalReport(
        feature_set=feature_set,
        n_features=X.shape[1],
        confusion=cm,
        kappa=kappa(cm),
        mae=mae, rmse=rmse, rae=rae, rrse=rrse,
        per_class=prf["per_class"],
        weighted=prf["weighted"],
        config_echo=echo,
        predictions=predictions,
        warnings=warnings,
    )
