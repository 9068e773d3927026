import json

import numpy as np
import pytest

from erploop.classifier import (
    LdaModel,
    balanced_accuracy,
    cross_validate,
    featurize,
    fit_lda,
    grade_for,
    predict_posterior,
)
from erploop.dsp import Epoch
from erploop.errors import CalibrationError, ConfigError, InputError, TrainingError


def _dataset(seed, n0=90, n1=30, d=24, sep=1.5):
    """Two gaussian classes with a shared non-spherical covariance."""
    rng = np.random.default_rng(seed)
    mix = np.eye(d) + 0.25 * rng.standard_normal((d, d))
    x0 = rng.standard_normal((n0, d)) @ mix
    x1 = rng.standard_normal((n1, d)) @ mix + sep * rng.standard_normal(d) / np.sqrt(d)
    X = np.vstack([x0, x1])
    labels = ["nontarget"] * n0 + ["target"] * n1
    return X, labels


def _closed_form_lda(X, labels):
    y = np.array([1 if l == "target" else 0 for l in labels])
    mu0 = X[y == 0].mean(axis=0)
    mu1 = X[y == 1].mean(axis=0)
    xc = X - np.where(y[:, None] == 1, mu1, mu0)
    S = xc.T @ xc / (len(y) - 2)
    w = np.linalg.inv(S) @ (mu1 - mu0)
    b = -0.5 * w @ (mu0 + mu1) + np.log(y.sum() / (len(y) - y.sum()))
    return w, b


def test_featurize_divisible_bins_are_plain_means() -> None:
    data = np.arange(8 * 30, dtype=float).reshape(8, 30)
    feats = featurize(data, m=15)
    manual = data.reshape(8, 15, 2).mean(axis=2).reshape(-1)
    assert feats.shape == (120,)
    assert np.array_equal(feats, manual)


def test_featurize_uneven_bins_differ_by_at_most_one_sample() -> None:
    data = np.arange(8 * 32, dtype=float).reshape(8, 32)
    feats = featurize(data, m=5).reshape(8, 5)
    edges = [0, 6, 13, 19, 26, 32]
    for k in range(5):
        seg = data[:, edges[k] : edges[k + 1]]
        assert np.allclose(feats[:, k], seg.mean(axis=1))
    widths = np.diff(edges)
    assert widths.max() - widths.min() <= 1
    assert widths.sum() == 32


def test_featurize_accepts_epochs() -> None:
    data = np.random.default_rng(0).standard_normal((8, 225))
    ep = Epoch(onset=0.0, target_id=1, data=data)
    assert np.array_equal(featurize(ep, m=15), featurize(data, m=15))


def test_featurize_bin_count_validation() -> None:
    data = np.zeros((8, 10))
    with pytest.raises(ConfigError):
        featurize(data, m=11)
    with pytest.raises(ConfigError):
        featurize(data, m=0)


def test_unregularized_fit_matches_closed_form() -> None:
    for seed in range(5):
        X, labels = _dataset(seed)
        model = fit_lda(X, labels, gamma=0.0)
        w, b = _closed_form_lda(X, labels)
        assert np.allclose(model.weights, w, rtol=1e-8, atol=1e-10)
        assert model.bias == pytest.approx(b, rel=1e-8)
        probe = np.random.default_rng(seed + 100).standard_normal((7, X.shape[1]))
        assert np.allclose(model.score(probe), probe @ w + b, rtol=1e-8)


def test_full_shrinkage_covariance_is_spherical() -> None:
    X, labels = _dataset(3)
    model = fit_lda(X, labels, gamma=1.0)
    d = X.shape[1]
    y = np.array([1 if l == "target" else 0 for l in labels])
    mu0, mu1 = X[y == 0].mean(axis=0), X[y == 1].mean(axis=0)
    xc = X - np.where(y[:, None] == 1, mu1, mu0)
    S = xc.T @ xc / (len(y) - 2)
    scale = np.trace(S) / d
    assert np.array_equal(model.pooled_cov_reg, scale * np.eye(d))
    assert np.array_equal(model.weights, (mu1 - mu0) / scale)


def test_partial_shrinkage_interpolates() -> None:
    X, labels = _dataset(1)
    m0 = fit_lda(X, labels, gamma=0.0)
    m1 = fit_lda(X, labels, gamma=1.0)
    mh = fit_lda(X, labels, gamma=0.5)
    assert np.allclose(mh.pooled_cov_reg, 0.5 * m0.pooled_cov_reg + 0.5 * m1.pooled_cov_reg)


def test_predictions_invariant_under_feature_scaling() -> None:
    X, labels = _dataset(2)
    probe = np.random.default_rng(42).standard_normal((20, X.shape[1]))
    base = fit_lda(X, labels, gamma=0.0)
    scaled = fit_lda(X * 3.7, labels, gamma=0.0)
    assert np.allclose(base.score(probe), scaled.score(probe * 3.7), rtol=1e-8)


def test_scores_invariant_under_feature_shift() -> None:
    X, labels = _dataset(4)
    shift = np.random.default_rng(5).standard_normal(X.shape[1]) * 10.0
    probe = np.random.default_rng(6).standard_normal((20, X.shape[1]))
    base = fit_lda(X, labels, gamma=0.0)
    moved = fit_lda(X + shift, labels, gamma=0.0)
    assert np.allclose(base.score(probe), moved.score(probe + shift), rtol=1e-7, atol=1e-9)


def test_posterior_is_logistic_of_score() -> None:
    X, labels = _dataset(0)
    model = fit_lda(X, labels)
    probe = np.random.default_rng(1).standard_normal((30, X.shape[1]))
    scores = model.score(probe)
    post = predict_posterior(model, probe)
    assert np.allclose(post, 1.0 / (1.0 + np.exp(-scores)), atol=1e-12)
    assert np.all((post > 0.0) & (post < 1.0))


def test_posterior_monotone_along_weight_vector() -> None:
    X, labels = _dataset(7)
    model = fit_lda(X, labels)
    x0 = X.mean(axis=0)
    steps = [predict_posterior(model, x0 + t * model.weights) for t in np.linspace(-3, 3, 13)]
    assert all(b > a for a, b in zip(steps[:-1], steps[1:]))


def test_posterior_extremes_stay_inside_unit_interval() -> None:
    X, labels = _dataset(8)
    model = fit_lda(X, labels, gamma=1.0)
    far = model.weights * 1e9
    assert predict_posterior(model, far) < 1.0
    assert predict_posterior(model, -far) > 0.0


def test_identical_class_means_give_zero_weights() -> None:
    v = np.array([1.0, -2.0, 3.0, 0.5])
    X = np.vstack([v, -v, 2 * v, -2 * v])
    labels = ["nontarget", "nontarget", "target", "target"]
    model = fit_lda(X, labels, gamma=1.0)
    assert np.array_equal(model.weights, np.zeros(4))
    # posterior collapses to the prior everywhere
    assert predict_posterior(model, v * 9.0) == pytest.approx(0.5)


def test_zero_variance_data_falls_back_to_zero_weights() -> None:
    X = np.vstack([np.zeros((3, 5)), np.ones((3, 5))])
    labels = ["nontarget"] * 3 + ["target"] * 3
    model = fit_lda(X, labels, gamma=1.0)
    assert np.array_equal(model.weights, np.zeros(5))


def test_model_json_round_trip_is_stable() -> None:
    X, labels = _dataset(9)
    model = fit_lda(X, labels, gamma=1.0, bins=15)
    text = model.to_json()
    clone = LdaModel.from_json(text)
    assert clone.to_json() == text
    probe = np.random.default_rng(2).standard_normal(X.shape[1])
    assert clone.score(probe) == model.score(probe)
    doc = json.loads(text)
    assert doc["kind"] == "lda-model"
    assert doc["format_version"] == 1


def test_from_json_rejects_foreign_documents() -> None:
    with pytest.raises(InputError):
        LdaModel.from_json(json.dumps({"kind": "something-else"}))


def test_fit_validation_errors() -> None:
    X, labels = _dataset(0)
    with pytest.raises(TrainingError):
        fit_lda(X[:5], ["target"] * 5)
    with pytest.raises(ConfigError):
        fit_lda(X, labels, gamma=1.5)
    with pytest.raises(ConfigError):
        fit_lda(X, labels, priors=(0.9, 0.2))
    with pytest.raises(InputError):
        fit_lda(X, labels[:-1])
    with pytest.raises(ConfigError):
        fit_lda(np.zeros((4, 0)), ["target", "target", "nontarget", "nontarget"])


def test_score_dimension_mismatch_rejected() -> None:
    X, labels = _dataset(0)
    model = fit_lda(X, labels)
    with pytest.raises(InputError):
        model.score(np.zeros(3))


def test_grade_boundaries_are_exact() -> None:
    assert grade_for(0.7999) == "red"
    assert grade_for(0.80) == "yellow"
    assert grade_for(0.85) == "yellow"
    assert grade_for(0.90) == "yellow"
    assert grade_for(0.9001) == "green"
    assert grade_for(1.0) == "green"


def test_cross_validation_on_separable_data() -> None:
    X, labels = _dataset(0, sep=40.0)
    report = cross_validate(X, labels, gamma=1.0, folds=5, seed=0)
    assert report.cv_accuracy == 1.0
    assert report.grade == "green"
    assert report.n_target == 30
    assert report.n_nontarget == 90
    assert report.folds == 5


def test_shuffled_labels_grade_red() -> None:
    reds = 0
    for seed in range(20):
        X, labels = _dataset(seed, sep=3.0)
        rng = np.random.default_rng(seed + 1000)
        shuffled = [labels[i] for i in rng.permutation(len(labels))]
        report = cross_validate(X, shuffled, gamma=1.0, folds=5, seed=seed)
        if report.grade == "red":
            reds += 1
    assert reds >= 19


def test_cross_validation_is_seeded() -> None:
    X, labels = _dataset(5, sep=0.8)
    a = cross_validate(X, labels, seed=3)
    b = cross_validate(X, labels, seed=3)
    assert a == b


def test_cross_validation_fold_constraints() -> None:
    X, labels = _dataset(0)
    with pytest.raises(CalibrationError):
        cross_validate(X, labels, folds=1)
    with pytest.raises(CalibrationError):
        cross_validate(X[:20], ["target"] * 3 + ["nontarget"] * 17, folds=5)


def test_balanced_accuracy_weighs_classes_equally() -> None:
    y_true = np.array([0, 0, 0, 1])
    y_pred = np.array([0, 1, 0, 1])
    assert balanced_accuracy(y_true, y_pred) == pytest.approx(5.0 / 6.0)
