import json

import numpy as np
import pytest

from eegemo.core import LABELS, EmotionLabel
from eegemo.errors import ConvergenceError, ValidationError
from eegemo.svm import (
    CLASS_PAIRS,
    BinaryModel,
    KernelParams,
    NormalizationParams,
    SvmConfig,
    SvmModel,
    dual_objective,
    fit_multiclass,
    full_alphas,
    gram_matrix,
    kkt_max_violation,
    normalize_apply,
    normalize_fit,
    poly_kernel,
    predict,
    train_binary_smo,
)

P = KernelParams()


def test_kernel_examples():
    assert poly_kernel([1, 2], [3, 4], P) == 1728.0  # (11 + 1) ** 3
    assert poly_kernel([0, 0], [5, 5], P) == 1.0
    assert poly_kernel([1, 1], [1, -1], KernelParams(c=0.0, deg=2)) == 0.0
    with pytest.raises(ValidationError):
        poly_kernel([1, 2], [1, 2, 3], P)
    with pytest.raises(ValidationError):
        KernelParams(deg=0)


def test_gram_psd():
    rng = np.random.default_rng(0)
    for _ in range(20):
        X = rng.uniform(0, 1, (int(rng.integers(2, 40)), 10))
        G = gram_matrix(X, X, P)
        np.testing.assert_allclose(G, G.T, rtol=1e-12)
        assert np.linalg.eigvalsh(G).min() >= -1e-8 * max(1.0, np.abs(G).max())


def test_normalization_examples():
    X = np.array([[0.0, 10.0, -1.0], [5.0, 10.0, 1.0], [10.0, 10.0, 3.0]])
    params = normalize_fit(X)
    np.testing.assert_array_equal(
        normalize_apply(params, X),
        [[0.0, 0.0, 0.0], [0.5, 0.0, 0.5], [1.0, 0.0, 1.0]],
    )
    # unseen values clamp into the unit box
    np.testing.assert_array_equal(normalize_apply(params, [[20.0, 3.0, -5.0]]), [[1.0, 0.0, 0.0]])
    back = NormalizationParams.from_dict(json.loads(json.dumps(params.to_dict())))
    np.testing.assert_array_equal(back.minimum, params.minimum)


def test_one_dimensional_closed_form():
    # points 0 and 1, linear kernel: w = 2, b = -1, alphas both 2
    X = np.array([[0.0], [1.0]])
    y = np.array([-1.0, 1.0])
    model = train_binary_smo(X, y, C=10.0, p=KernelParams(c=0.0, deg=1), tol=1e-6)
    np.testing.assert_allclose(full_alphas(model, 2), [2.0, 2.0], atol=1e-6)
    assert model.bias == pytest.approx(-1.0, abs=1e-6)
    assert model.decision_function([[0.5]])[0] == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("p", [KernelParams(c=1.0, deg=2), P])
def test_xor_separable(p):
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    model = train_binary_smo(X, y, C=100.0, p=p)
    assert (np.sign(model.decision_function(X)) == y).all()


def test_stalled_pair_regression():
    # an alpha left a rounding error below C once looked free with an empty box;
    # replay the stream up to the instance that stalled and train on it alone
    rng = np.random.default_rng(7)
    for trial in range(375):
        n = int(rng.integers(4, 60))
        X = rng.uniform(0, 1, (n, int(rng.integers(1, 31))))
        if trial % 3 == 0:
            X[n // 2:] = X[: n - n // 2]
        y = np.where(rng.uniform(size=n) < 0.5, 1.0, -1.0)
        y[0], y[1] = 1.0, -1.0
        C = float(rng.choice([0.1, 0.5, 1.0, 10.0, 100.0]))
    model = train_binary_smo(X, y, C, P, seed=trial)
    assert kkt_max_violation(model, X, y) <= 1e-3


def _qp_reference(X, y, C, p):
    import cvxpy as cp

    K = gram_matrix(X, X, p)
    Q = np.outer(y, y) * K
    # factor Q for a DCP-friendly quadratic
    w, V = np.linalg.eigh((Q + Q.T) / 2)
    L = V * np.sqrt(np.clip(w, 0, None))
    a = cp.Variable(len(y))
    objective = cp.Maximize(cp.sum(a) - 0.5 * cp.sum_squares(L.T @ a))
    cp.Problem(objective, [a >= 0, a <= C, y @ a == 0]).solve()
    return float(objective.value)


def test_smo_matches_qp_oracle():
    pytest.importorskip("cvxpy")
    rng = np.random.default_rng(42)
    gaps = []
    for trial in range(50):
        n = int(rng.integers(4, 21))
        X = rng.uniform(0, 1, (n, int(rng.integers(1, 6))))
        y = np.where(rng.uniform(size=n) < 0.5, 1.0, -1.0)
        y[0], y[1] = 1.0, -1.0
        C = float(rng.choice([0.5, 1.0, 10.0]))
        model = train_binary_smo(X, y, C, P, tol=1e-3, seed=trial)
        ours = dual_objective(full_alphas(model, n), X, y, P)
        ref = _qp_reference(X, y, C, P)
        gaps.append(abs(ours - ref) / max(1.0, abs(ref)))
        assert kkt_max_violation(model, X, y) <= 1e-3
        alpha = full_alphas(model, n)
        assert (alpha >= 0).all() and (alpha <= C + 1e-12).all()
        assert abs(alpha @ y) < 1e-8
    assert max(gaps) < 1e-3


def test_kkt_verifier_catches_bad_bias():
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 1, (30, 3))
    y = np.where(X[:, 0] > 0.5, 1.0, -1.0)
    model = train_binary_smo(X, y, 1.0, P)
    assert kkt_max_violation(model, X, y) <= 1e-3
    shifted = BinaryModel(model.support_vectors, model.alphas, model.signs, model.bias + 0.5,
                          model.kernel, model.C, model.support_indices)
    assert kkt_max_violation(shifted, X, y) > 0.1


def test_binary_input_validation():
    X = np.zeros((3, 2))
    with pytest.raises(ValidationError, match="both classes"):
        train_binary_smo(X, [1, 1, 1])
    with pytest.raises(ValidationError):
        train_binary_smo(X, [1, 0, -1])
    with pytest.raises(ValidationError):
        train_binary_smo(X, [1, -1])


def test_convergence_error_when_pass_budget_exhausted():
    rng = np.random.default_rng(3)
    X = rng.uniform(0, 1, (80, 5))
    y = np.where(rng.uniform(size=80) < 0.5, 1.0, -1.0)
    with pytest.raises(ConvergenceError) as info:
        train_binary_smo(X, y, 10.0, P, max_passes=1)
    assert info.value.max_violation > 1e-3


def _four_class_data(seed=0, per_class=8):
    rng = np.random.default_rng(seed)
    centers = np.array([[0, 0, 0], [3, 0, 0], [0, 3, 0], [0, 0, 3]], dtype=float)
    X = np.concatenate([c + rng.normal(scale=0.3, size=(per_class, 3)) for c in centers])
    labels = np.repeat(np.arange(4), per_class)
    return X, labels


def test_multiclass_six_models_and_fit():
    X, labels = _four_class_data()
    model = fit_multiclass(X, labels)
    assert sorted(model.pairwise) == list(CLASS_PAIRS)
    assert len(model.pairwise) == 6
    pred, dist = model.predict_many(X)
    assert (pred == labels).all()
    np.testing.assert_allclose(dist.sum(axis=1), 1.0)
    label, d = predict(model, X[0])
    assert label is EmotionLabel.HAPPY and d[0] == 0.5


def test_multiclass_missing_class():
    X, labels = _four_class_data()
    keep = labels != 2
    with pytest.raises(ValidationError, match="Sad"):
        fit_multiclass(X[keep], labels[keep])


def test_multiclass_deterministic_and_jobs_invariant():
    X, labels = _four_class_data(1)
    a = fit_multiclass(X, labels, seed=7)
    b = fit_multiclass(X, labels, seed=7, jobs=4)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def _stub(bias):
    return BinaryModel(np.empty((0, 0)), np.empty(0), np.empty(0), float(bias), P, 1.0,
                       np.empty(0, dtype=np.int64))


def _stub_model(biases):
    norm = NormalizationParams(np.zeros(2), np.ones(2))
    return SvmModel({pair: _stub(b) for pair, b in zip(CLASS_PAIRS, biases)}, norm, SvmConfig())


@pytest.mark.parametrize("biases,label,dist", [
    ([1] * 6, "Happy", [3, 2, 1, 0]),
    ([-1] * 6, "Angry", [0, 1, 2, 3]),
    # pairs (0,1) (0,2) (0,3) (1,2) (1,3) (2,3): three-way tie, lowest index wins
    ([1, -1, 1, 1, 1, 1], "Happy", [2, 2, 2, 0]),
    ([-1, -1, -1, 1, 1, -1], "Relaxed", [0, 3, 1, 2]),
    # a decision value of exactly zero counts for the first class
    ([0] * 6, "Happy", [3, 2, 1, 0]),
])
def test_vote_rules(biases, label, dist):
    got, d = predict(_stub_model(biases), np.array([0.3, 0.7]))
    assert got.title == label
    np.testing.assert_array_equal(d * 6, dist)


def test_serialization_round_trip_bit_exact():
    X, labels = _four_class_data(2)
    model = fit_multiclass(X, labels, SvmConfig(C=2.0), seed=3)
    restored = SvmModel.from_dict(json.loads(json.dumps(model.to_dict())))
    probe = np.random.default_rng(9).normal(scale=2.0, size=(50, 3))
    for m0, m1 in zip(model.pairwise.values(), restored.pairwise.values()):
        assert m0.decision_function(probe).tobytes() == m1.decision_function(probe).tobytes()
    assert model.predict_many(probe)[1].tobytes() == restored.predict_many(probe)[1].tobytes()
    assert restored.config == model.config
    assert restored.classes == LABELS


def test_config_coercion_and_validation():
    assert SvmConfig(tol="1e-3").tol == 1e-3
    for bad in (dict(C=0), dict(tol=-1), dict(deg=0), dict(C="x")):
        with pytest.raises(ValidationError):
            SvmConfig(**bad)
