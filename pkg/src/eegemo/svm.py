"""Polynomial-kernel soft-margin SVM trained with SMO, one-vs-one multiclass.

The binary solver follows Platt's sequential minimal optimization: outer
loop alternating full and non-bound passes, second choice by maximal
``|E1 - E2|`` with randomized fallbacks.  When the outer loop settles, the
bias is re-derived from the alphas as the value minimizing the largest KKT
violation.  If that violation still exceeds ``tol``, training finishes with
maximal-violating-pair steps, which are guaranteed to terminate.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from itertools import combinations

import numpy as np

from .core import LABELS, EmotionLabel
from .errors import ConvergenceError, ValidationError

SUPPORT_THRESHOLD = 1e-9
MAX_PASSES = 100_000
HEURISTIC_PASSES = 1_000


def _coerce_fields(obj, **types):
    for name, kind in types.items():
        value = getattr(obj, name)
        try:
            object.__setattr__(obj, name, kind(value))
        except (TypeError, ValueError):
            raise ValidationError(f"{name}: expected {kind.__name__}, got {value!r}") from None


@dataclass(frozen=True)
class KernelParams:
    c: float = 1.0
    deg: int = 3

    def __post_init__(self):
        if int(self.deg) != self.deg or self.deg < 1:
            raise ValidationError(f"polynomial degree must be a positive integer, got {self.deg}")
        if not self.c >= 0:
            raise ValidationError(f"kernel constant must be non-negative, got {self.c}")
        object.__setattr__(self, "deg", int(self.deg))
        object.__setattr__(self, "c", float(self.c))


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    deg: int = 3
    c: float = 1.0
    tol: float = 1e-3

    def __post_init__(self):
        _coerce_fields(self, C=float, deg=int, c=float, tol=float)
        if not self.C > 0:
            raise ValidationError(f"C must be positive, got {self.C}")
        if not self.tol > 0:
            raise ValidationError(f"tol must be positive, got {self.tol}")
        KernelParams(self.c, self.deg)

    @property
    def kernel(self) -> KernelParams:
        return KernelParams(self.c, self.deg)

    def to_dict(self) -> dict:
        return asdict(self)


def poly_kernel(a, b, p: KernelParams) -> float:
    """(<a, b> + c) ** deg"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float((np.dot(a, b) + p.c) ** p.deg)


def gram_matrix(X, Y, p: KernelParams) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[1] != Y.shape[1]:
        raise ValidationError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    return (X @ Y.T + p.c) ** p.deg


@dataclass(frozen=True, eq=False)
class NormalizationParams:
    minimum: np.ndarray
    maximum: np.ndarray

    def to_dict(self) -> dict:
        return {"min": self.minimum.tolist(), "max": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, d) -> "NormalizationParams":
        return cls(np.array(d["min"], dtype=np.float64), np.array(d["max"], dtype=np.float64))


def normalize_fit(X) -> NormalizationParams:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] < 1:
        raise ValidationError("normalization needs at least one vector")
    return NormalizationParams(X.min(axis=0), X.max(axis=0))


def normalize_apply(params: NormalizationParams, X) -> np.ndarray:
    """Min-max scale into [0, 1]; constant features map to 0, unseen values clamp."""
    X = np.asarray(X, dtype=np.float64)
    span = params.maximum - params.minimum
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (X - params.minimum) / safe, 0.0)
    return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class BinaryModel:
    """Trained two-class machine; ``signs`` are +1 for the first class."""

    support_vectors: np.ndarray
    alphas: np.ndarray
    signs: np.ndarray
    bias: float
    kernel: KernelParams
    C: float
    support_indices: np.ndarray
    passes: int = 0

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.alphas.size == 0:
            return np.full(X.shape[0], self.bias)
        K = gram_matrix(self.support_vectors, X, self.kernel)
        return (self.alphas * self.signs) @ K + self.bias

    def to_dict(self) -> dict:
        return {
            "support_vectors": self.support_vectors.tolist(),
            "alphas": self.alphas.tolist(),
            "signs": self.signs.astype(int).tolist(),
            "bias": self.bias,
            "kernel": asdict(self.kernel),
            "C": self.C,
            "support_indices": self.support_indices.tolist(),
            "passes": self.passes,
        }

    @classmethod
    def from_dict(cls, d) -> "BinaryModel":
        n_sv = len(d["alphas"])
        sv = np.array(d["support_vectors"], dtype=np.float64)
        return cls(
            support_vectors=sv.reshape(n_sv, -1) if n_sv else sv.reshape(0, 0),
            alphas=np.array(d["alphas"], dtype=np.float64),
            signs=np.array(d["signs"], dtype=np.float64),
            bias=float(d["bias"]),
            kernel=KernelParams(**d["kernel"]),
            C=float(d["C"]),
            support_indices=np.array(d["support_indices"], dtype=np.int64),
            passes=int(d.get("passes", 0)),
        )


def _optimal_bias(grad, y, alpha, C):
    """Bias minimizing the largest KKT violation, and that violation.

    ``grad`` is the kernel expansion without bias.  Each point bounds the
    bias from below, above, or both, depending on its alpha and label.
    """
    target = y - grad
    at_zero = alpha <= 0.0
    at_c = alpha >= C
    free = ~(at_zero | at_c)
    lower = free | (at_zero & (y > 0)) | (at_c & (y < 0))
    upper = free | (at_zero & (y < 0)) | (at_c & (y > 0))
    lo = target[lower].max() if lower.any() else target[upper].min()
    hi = target[upper].min() if upper.any() else lo
    return 0.5 * (lo + hi), max(0.0, 0.5 * (lo - hi))


class _Smo:
    def __init__(self, K, y, C, tol, rng, eps=1e-10):
        self.K = K
        self.y = y
        self.C = C
        self.tol = tol
        self.rng = rng
        self.eps = eps
        self.n = y.size
        self.alpha = np.zeros(self.n)
        self.b = 0.0
        self.E = -y.astype(np.float64)  # f(x) - y with alpha = 0, b = 0

    def _nonbound(self):
        return np.flatnonzero((self.alpha > 0) & (self.alpha < self.C))

    def _objective_gain(self, i1, i2, t):
        # dual objective change when alpha2 moves by t (alpha1 compensates)
        eta = self.K[i1, i1] + self.K[i2, i2] - 2 * self.K[i1, i2]
        return self.y[i2] * (self.E[i1] - self.E[i2]) * t - 0.5 * eta * t * t

    def take_step(self, i1, i2):
        if i1 == i2:
            return False
        C, y, K = self.C, self.y, self.K
        a1, a2 = self.alpha[i1], self.alpha[i2]
        y1, y2 = y[i1], y[i2]
        E1, E2 = self.E[i1], self.E[i2]
        s = y1 * y2
        if s < 0:
            L, H = max(0.0, a2 - a1), min(C, C + a2 - a1)
        else:
            L, H = max(0.0, a1 + a2 - C), min(C, a1 + a2)
        if H - L <= 1e-14 * C:
            return False
        eta = K[i1, i1] + K[i2, i2] - 2 * K[i1, i2]
        if eta > 1e-12:
            a2_new = min(H, max(L, a2 + y2 * (E1 - E2) / eta))
        else:
            gain_l = self._objective_gain(i1, i2, L - a2)
            gain_h = self._objective_gain(i1, i2, H - a2)
            if gain_l > gain_h + self.eps:
                a2_new = L
            elif gain_h > gain_l + self.eps:
                a2_new = H
            else:
                return False
        if abs(a2_new - a2) < self.eps * (a2_new + a2 + self.eps):
            return False
        a1_new = a1 + s * (a2 - a2_new)
        # snap round-off onto the box
        if a1_new < 1e-12 * C:
            a2_new += s * a1_new
            a1_new = 0.0
        elif a1_new > C * (1 - 1e-12):
            a2_new += s * (a1_new - C)
            a1_new = C
        a2_new = min(C, max(0.0, a2_new))
        # a2 can land a rounding error off a bound too; an unsnapped one looks
        # free but has an empty box, and the pair stalls forever
        if a2_new < 1e-12 * C:
            a2_new = 0.0
        elif a2_new > C * (1 - 1e-12):
            a2_new = C

        d1 = y1 * (a1_new - a1)
        d2 = y2 * (a2_new - a2)
        b1 = self.b - E1 - d1 * K[i1, i1] - d2 * K[i1, i2]
        b2 = self.b - E2 - d1 * K[i1, i2] - d2 * K[i2, i2]
        if 0 < a1_new < C:
            b_new = b1
        elif 0 < a2_new < C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        self.E += d1 * K[:, i1] + d2 * K[:, i2] + (b_new - self.b)
        self.alpha[i1] = a1_new
        self.alpha[i2] = a2_new
        self.b = b_new
        return True

    def examine(self, i2):
        r2 = self.E[i2] * self.y[i2]
        a2 = self.alpha[i2]
        if not ((r2 < -self.tol and a2 < self.C) or (r2 > self.tol and a2 > 0)):
            return False
        nonbound = self._nonbound()
        if nonbound.size > 1:
            i1 = nonbound[np.argmax(np.abs(self.E[nonbound] - self.E[i2]))]
            if self.take_step(i1, i2):
                return True
        for i1 in np.roll(nonbound, -int(self.rng.integers(max(nonbound.size, 1)))):
            if self.take_step(i1, i2):
                return True
        for i1 in np.roll(np.arange(self.n), -int(self.rng.integers(self.n))):
            if self.take_step(i1, i2):
                return True
        return False

    def refresh_bias(self):
        grad = self.E + self.y - self.b
        self.b, violation = _optimal_bias(grad, self.y, self.alpha, self.C)
        self.E = grad + self.b - self.y
        return violation

    def solve(self, max_passes):
        passes = 0
        examine_all = True
        changed = 0
        while changed > 0 or examine_all:
            if passes >= max_passes:
                raise ConvergenceError(
                    f"SMO did not converge within {max_passes} passes", self.refresh_bias()
                )
            if passes >= HEURISTIC_PASSES:
                break  # crawling; hand over to the pair search below
            passes += 1
            candidates = np.arange(self.n) if examine_all else self._nonbound()
            changed = sum(self.examine(i) for i in self.rng.permutation(candidates))
            if examine_all:
                examine_all = False
            elif changed == 0:
                examine_all = True
        if self.refresh_bias() <= self.tol:
            return passes
        return self._finish_max_violating(passes, max_passes)

    def _violating_pair(self):
        y, alpha, C = self.y, self.alpha, self.C
        target = -self.E  # y - f(x) with the current bias; the offset is shared
        at_zero, at_c = alpha <= 0.0, alpha >= C
        free = ~(at_zero | at_c)
        lower = free | (at_zero & (y > 0)) | (at_c & (y < 0))
        upper = free | (at_zero & (y < 0)) | (at_c & (y > 0))
        i = np.flatnonzero(lower)[np.argmax(target[lower])]
        j = np.flatnonzero(upper)[np.argmin(target[upper])]
        return i, j, 0.5 * (target[i] - target[j])

    def _finish_max_violating(self, passes, max_passes):
        # Platt's heuristics can crawl on ill-conditioned problems; stepping on
        # the maximal violating pair always terminates for tol > 0
        while True:
            if passes >= max_passes:
                raise ConvergenceError(
                    f"SMO did not converge within {max_passes} passes", self.refresh_bias()
                )
            passes += 1
            for _ in range(self.n):
                i, j, gap = self._violating_pair()
                if gap <= self.tol:
                    self.refresh_bias()
                    return passes
                if not self.take_step(i, j):
                    raise ConvergenceError(
                        "SMO stalled on a violating pair", self.refresh_bias()
                    )


def train_binary_smo(X, y, C: float = 1.0, p: KernelParams = KernelParams(),
                     tol: float = 1e-3, seed: int = 0,
                     max_passes: int = MAX_PASSES) -> BinaryModel:
    """Train a soft-margin binary SVM on normalized vectors with labels +-1."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] != y.size:
        raise ValidationError(f"{X.shape[0]} vectors but {y.size} labels")
    if not np.isfinite(X).all():
        raise ValidationError("training features contain non-finite values")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise ValidationError("binary labels must be +1 or -1")
    if not ((y > 0).any() and (y < 0).any()):
        raise ValidationError("binary training needs both classes present")
    if not (C > 0 and tol > 0):
        raise ValidationError("C and tol must be positive")

    solver = _Smo(gram_matrix(X, X, p), y, float(C), float(tol), np.random.default_rng(seed))
    passes = solver.solve(max_passes)
    keep = np.flatnonzero(solver.alpha > SUPPORT_THRESHOLD)
    return BinaryModel(
        support_vectors=X[keep].copy(),
        alphas=solver.alpha[keep].copy(),
        signs=y[keep].copy(),
        bias=float(solver.b),
        kernel=p,
        C=float(C),
        support_indices=keep,
        passes=passes,
    )


def full_alphas(model: BinaryModel, n: int) -> np.ndarray:
    alpha = np.zeros(n)
    alpha[model.support_indices] = model.alphas
    return alpha


def dual_objective(alpha, X, y, p: KernelParams) -> float:
    """sum(alpha) - 1/2 alpha' Q alpha with Q_ij = y_i y_j K_ij."""
    ay = np.asarray(alpha) * np.asarray(y, dtype=np.float64)
    return float(np.sum(alpha) - 0.5 * ay @ gram_matrix(X, X, p) @ ay)


def kkt_max_violation(model: BinaryModel, X, y) -> float:
    """Largest KKT violation of ``model`` over its training set.

    Evaluates margins through the model's own decision function, not the
    solver state.
    """
    y = np.asarray(y, dtype=np.float64)
    margin = y * model.decision_function(X) - 1.0
    alpha = full_alphas(model, y.size)
    at_zero = alpha <= SUPPORT_THRESHOLD
    at_c = alpha >= model.C * (1 - 1e-12)
    free = ~(at_zero | at_c)
    viol = np.zeros_like(margin)
    viol[at_zero] = np.maximum(0.0, -margin[at_zero])
    viol[at_c] = np.maximum(0.0, margin[at_c])
    viol[free] = np.abs(margin[free])
    return float(viol.max(initial=0.0))


CLASS_PAIRS = tuple(combinations(range(len(LABELS)), 2))


@dataclass(frozen=True, eq=False)
class SvmModel:
    pairwise: dict  # (i, j) -> BinaryModel, i < j, +1 means class i
    norm: NormalizationParams
    config: SvmConfig
    classes: tuple = LABELS

    def votes(self, X) -> np.ndarray:
        Z = normalize_apply(self.norm, np.atleast_2d(np.asarray(X, dtype=np.float64)))
        votes = np.zeros((Z.shape[0], len(self.classes)), dtype=np.int64)
        for (i, j), model in self.pairwise.items():
            first = model.decision_function(Z) >= 0
            votes[first, i] += 1
            votes[~first, j] += 1
        return votes

    def predict_many(self, X):
        votes = self.votes(X)
        return votes.argmax(axis=1), votes / len(self.pairwise)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "classes": [c.title for c in self.classes],
            "normalization": self.norm.to_dict(),
            "pairwise": [
                {"pair": [self.classes[i].title, self.classes[j].title], **m.to_dict()}
                for (i, j), m in sorted(self.pairwise.items())
            ],
        }

    @classmethod
    def from_dict(cls, d) -> "SvmModel":
        classes = tuple(EmotionLabel.parse(c) for c in d["classes"])
        pairwise = {}
        for entry in d["pairwise"]:
            i, j = (classes.index(EmotionLabel.parse(c)) for c in entry["pair"])
            pairwise[i, j] = BinaryModel.from_dict(entry)
        return cls(pairwise, NormalizationParams.from_dict(d["normalization"]),
                   SvmConfig(**d["config"]), classes)


def fit_multiclass(X, labels, cfg: SvmConfig = SvmConfig(), seed: int = 0,
                   jobs: int = 1) -> SvmModel:
    """One-vs-one training on raw feature rows and integer labels 0..3."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)
    missing = [LABELS[k].title for k in range(len(LABELS)) if not (labels == k).any()]
    if missing:
        raise ValidationError(f"training data lacks class {', '.join(missing)}")
    norm = normalize_fit(X)
    Z = normalize_apply(norm, X)

    def train_pair(pair):
        i, j = pair
        idx = np.flatnonzero((labels == i) | (labels == j))
        y = np.where(labels[idx] == i, 1.0, -1.0)
        return train_binary_smo(Z[idx], y, cfg.C, cfg.kernel, cfg.tol,
                                seed=int(np.random.SeedSequence([seed, i, j]).generate_state(1)[0]))

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            models = list(pool.map(train_pair, CLASS_PAIRS))
    else:
        models = [train_pair(pair) for pair in CLASS_PAIRS]
    return SvmModel(dict(zip(CLASS_PAIRS, models)), norm, cfg)


def train_multiclass(ds, cfg: SvmConfig = SvmConfig(), seed: int = 0,
                     columns: slice = slice(None), jobs: int = 1) -> SvmModel:
    """Train on a :class:`~eegemo.dataset.Dataset`, optionally on a column subset."""
    return fit_multiclass(ds.matrix(columns), ds.labels, cfg, seed, jobs)


def predict(model: SvmModel, x) -> tuple[EmotionLabel, np.ndarray]:
    """Label and vote distribution for one vector; ties go to the lowest index."""
    if hasattr(x, "as_array"):
        x = x.as_array()
    label, dist = model.predict_many(np.asarray(x, dtype=np.float64)[None, :])
    return model.classes[int(label[0])], dist[0]
