import json

import numpy as np
import pytest

from conftest import matrix_from_columns
from pathlens.baselines import MlpConfig, fit_mlp, predict_mlp
from pathlens.baselines.mlp import loss_and_gradient, mlp_to_json
from pathlens.errors import DataError


def _instance(seed, n=40, p=6):
    rng = np.random.default_rng(seed)
    m = matrix_from_columns({f"f{j}": rng.standard_normal(n) for j in range(p)})
    labels = rng.integers(0, 2, n)
    return m, labels


def _flat_params(seed, n, p, h):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = rng.integers(0, 2, n).astype(float)
    w1 = rng.uniform(-0.5, 0.5, (p, h))
    b1 = rng.uniform(-0.5, 0.5, h)
    w2 = rng.uniform(-0.5, 0.5, h)
    b2 = float(rng.uniform(-0.5, 0.5))
    return X, y, w1, b1, w2, b2


def test_parameter_count():
    m, labels = _instance(0, p=6)
    fitted = fit_mlp(m, labels, MlpConfig(hidden_units=10, max_iterations=2))
    assert fitted.parameter_count == (6 + 1) * 10 + 10 + 1


def test_analytic_gradient_matches_central_differences():
    step = 1e-5
    for seed in range(4):
        X, y, w1, b1, w2, b2 = _flat_params(seed, n=16, p=4, h=10)
        _, (g_w1, g_b1, g_w2, g_b2) = loss_and_gradient(X, y, w1, b1, w2, b2, 0.1)

        def loss_at(w1=w1, b1=b1, w2=w2, b2=b2):
            return loss_and_gradient(X, y, w1, b1, w2, b2, 0.1)[0]

        for index in [(0, 0), (1, 2), (3, 9)]:
            up = w1.copy(); up[index] += step
            down = w1.copy(); down[index] -= step
            fd = (loss_at(w1=up) - loss_at(w1=down)) / (2 * step)
            assert g_w1[index] == pytest.approx(fd, rel=1e-6)
        fd = (loss_at(b2=b2 + step) - loss_at(b2=b2 - step)) / (2 * step)
        assert g_b2 == pytest.approx(fd, rel=1e-6)


def test_loss_monotone_under_accepted_steps():
    m, labels = _instance(1)
    losses = []
    for iters in (1, 5, 20, 100):
        fitted = fit_mlp(m, labels, MlpConfig(max_iterations=iters, seed=3))
        losses.append(fitted.final_loss)
    assert losses == sorted(losses, reverse=True)


def test_huge_decay_shrinks_weights_to_zero():
    m, labels = _instance(2)
    fitted = fit_mlp(m, labels, MlpConfig(decay=1e6, max_iterations=400, seed=0))
    assert np.abs(fitted.w1).max() < 1e-2
    assert np.abs(fitted.w2).max() < 1e-2
    assert abs(fitted.b2) < 1e-2


def test_fit_is_deterministic():
    m, labels = _instance(3)
    a = fit_mlp(m, labels, MlpConfig(max_iterations=50, seed=9))
    b = fit_mlp(m, labels, MlpConfig(max_iterations=50, seed=9))
    assert mlp_to_json(a) == mlp_to_json(b)
    c = fit_mlp(m, labels, MlpConfig(max_iterations=50, seed=10))
    assert mlp_to_json(a) != mlp_to_json(c)


def test_predictions_clamped_and_thresholded():
    m, labels = _instance(4)
    fitted = fit_mlp(m, labels, MlpConfig(max_iterations=100, seed=1))
    predictions = predict_mlp(fitted, m, labels)
    assert np.all(predictions.probability >= 0.0)
    assert np.all(predictions.probability <= 1.0)
    assert np.array_equal(predictions.label, (predictions.raw >= 0.5).astype(int))


def test_predict_rejects_column_mismatch():
    m, labels = _instance(5)
    fitted = fit_mlp(m, labels, MlpConfig(max_iterations=2))
    with pytest.raises(DataError, match="do not match"):
        predict_mlp(fitted, m.take_columns(list(reversed(m.column_names))))


def test_invalid_configuration_rejected():
    m, labels = _instance(6)
    with pytest.raises(DataError):
        fit_mlp(m, labels, MlpConfig(hidden_units=0))
    with pytest.raises(DataError):
        fit_mlp(m, labels, MlpConfig(max_iterations=0))
    with pytest.raises(DataError):
        fit_mlp(m, labels, MlpConfig(decay=-0.1))


def test_json_round_trip_fields():
    m, labels = _instance(7, p=3)
    fitted = fit_mlp(m, labels, MlpConfig(max_iterations=5, seed=2))
    doc = json.loads(mlp_to_json(fitted))
    assert doc["w1"]["shape"] == [3, 10]
    assert len(doc["w1"]["values"]) == 30
    assert doc["feature_names"] == m.column_names
    assert doc["iterations"] == fitted.iterations


def test_memorizes_separable_data_with_small_decay():
    rng = np.random.default_rng(8)
    x = np.concatenate([rng.normal(-3, 0.3, 25), rng.normal(3, 0.3, 25)])
    labels = np.array([0] * 25 + [1] * 25)
    m = matrix_from_columns({"x": x})
    fitted = fit_mlp(m, labels, MlpConfig(decay=1e-4, max_iterations=1000, seed=0))
    predictions = predict_mlp(fitted, m, labels)
    assert np.array_equal(predictions.label, labels)
