"""Acceptance suite: one test per release criterion.

Each test prints a single "PASS criterion N" line on success (visible with
pytest -s or in captured output); a failed criterion shows up as a failed
test. Tolerances are part of the contract and must not be loosened.
"""

import time

import numpy as np
import pytest

from conftest import matrix_from_columns
from pathlens.baselines import ForestConfig, MlpConfig, fit_forest, predict_forest
from pathlens.baselines.mlp import loss_and_gradient
from pathlens.dataset import encode_indicators, standardize_within_group
from pathlens.evaluation import (
    benchmark_suite,
    benchmark_table_to_dict,
    classification_metrics,
)
from pathlens.model_spec import PathSpec, builtin_recall_model, parse_model_spec, validate_model
from pathlens.pls import fit_pls, predict_pls, sensitivity_levers
from pathlens.predictions import PredictionSet
from pathlens.synth import (
    aligned_paths,
    default_synth_config,
    generate_synthetic,
    small_case_oracle,
)

SINGLE_INDICATOR_TEXT = """\
construct A formative
  indicator a numeric
construct B formative
  indicator b numeric
construct C formative
  indicator c numeric
construct Y reflective
  indicator recall binary-outcome
path A -> Y
path B -> Y
path C -> Y
"""


def _passed(number, text):
    print(f"PASS criterion {number}: {text}")


def _builtin():
    return validate_model(builtin_recall_model())


def _scaled_config(seed, total):
    cfg = default_synth_config(seed=seed)
    scale = total / sum(s.n for s in cfg.studies)
    for study in cfg.studies:
        study.n = int(round(study.n * scale))
    return cfg


def _encoded_synthetic(seed, total=1152, cfg=None):
    cfg = cfg or _scaled_config(seed, total)
    return encode_indicators(generate_synthetic(cfg), builtin_recall_model()), cfg


def test_criterion_01_closed_form_equivalence():
    model = validate_model(parse_model_spec(SINGLE_INDICATOR_TEXT))
    start = time.perf_counter()
    for seed in range(20):
        rng = np.random.default_rng([100, seed])
        a, b, c = rng.standard_normal((3, 50))
        latent = 0.7 * a - 0.4 * b + 0.2 * c + rng.standard_normal(50)
        recall = (latent > np.median(latent)).astype(float)
        m = matrix_from_columns({"a": a, "b": b, "c": c, "recall": recall})
        standardized, params = standardize_within_group(m)
        fitted = fit_pls(standardized, model, params)
        oracle = small_case_oracle(m, model)
        betas = [fitted.path_coefficients[PathSpec(p, "Y")] for p in ("A", "B", "C")]
        assert np.max(np.abs(np.array(betas) - oracle.coefficients)) < 1e-8
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, f"20 instances took {elapsed:.2f}s"
    _passed(1, f"20/20 instances match the least-squares oracle in {elapsed:.2f}s")


def test_criterion_02_degenerate_correctness():
    model = validate_model(
        parse_model_spec(
            "construct X formative\n  indicator x numeric\n"
            "construct Y reflective\n  indicator recall binary-outcome\n"
            "path X -> Y"
        )
    )
    recall = np.tile([0.0, 1.0], 10)
    for sign, x in ((1.0, recall.copy()), (-1.0, 1.0 - recall)):
        m = matrix_from_columns({"x": x, "recall": recall})
        standardized, params = standardize_within_group(m)
        fitted = fit_pls(standardized, model, params)
        beta = fitted.path_coefficients[PathSpec("X", "Y")]
        assert abs(beta - sign) < 1e-9
        assert abs(fitted.r_squared["Y"] - 1.0) < 1e-9
    _passed(2, "perfectly (anti)correlated data gives beta=+/-1, R^2=1")


def test_criterion_03_synthetic_parameter_recovery():
    start = time.perf_counter()
    encoded, cfg = _encoded_synthetic(seed=1, total=5000)
    standardized, params = standardize_within_group(encoded)
    fitted = fit_pls(standardized, _builtin(), params)
    recovered = aligned_paths(fitted, cfg)
    elapsed = time.perf_counter() - start
    errors = {
        name: abs(recovered[name] - truth) for name, truth in cfg.true_paths.items()
    }
    assert max(errors.values()) < 0.05, errors
    assert elapsed < 10.0, f"recovery run took {elapsed:.2f}s"
    _passed(3, f"n=5000 recovery errors {max(errors.values()):.4f} < 0.05 in {elapsed:.1f}s")


def test_criterion_04_scale_invariance():
    model = _builtin()
    encoded, _ = _encoded_synthetic(seed=2, total=288)
    numeric_columns = [
        "scene_lighting", "scene_congruence", "exposure_time_normalized",
        "task_focus", "task_audio", "ar_familiarity", "vr_familiarity",
    ]
    standardized, params = standardize_within_group(encoded)
    reference = fit_pls(standardized, model, params)
    reference_pred = predict_pls(reference, encoded)
    for column in numeric_columns:
        scaled = encoded.take_rows(np.arange(encoded.n_rows))
        scaled.values[:, scaled.column_names.index(column)] *= 10.0
        std_scaled, params_scaled = standardize_within_group(scaled)
        fitted = fit_pls(std_scaled, model, params_scaled)
        for path, beta in reference.path_coefficients.items():
            assert abs(fitted.path_coefficients[path] - beta) < 1e-9, column
        for construct, loadings in reference.loadings.items():
            for name, loading in loadings.items():
                assert abs(fitted.loadings[construct][name] - loading) < 1e-9
        predictions = predict_pls(fitted, scaled)
        assert np.max(np.abs(predictions.probability - reference_pred.probability)) < 1e-9
    _passed(4, f"scaling any of {len(numeric_columns)} numeric columns by 10 is a no-op")


def test_criterion_05_mlp_gradient_check():
    step = 1e-5
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng([200, seed])
        X = rng.standard_normal((16, 4))
        y = rng.integers(0, 2, 16).astype(float)
        w1 = rng.uniform(-0.5, 0.5, (4, 10))
        b1 = rng.uniform(-0.5, 0.5, 10)
        w2 = rng.uniform(-0.5, 0.5, 10)
        b2 = float(rng.uniform(-0.5, 0.5))
        _, grads = loss_and_gradient(X, y, w1, b1, w2, b2, 0.1)
        analytic = np.concatenate(
            [grads[0].ravel(), grads[1], grads[2], [grads[3]]]
        )
        flat = np.concatenate([w1.ravel(), b1, w2, [b2]])

        def loss_of(vector):
            p1 = vector[:40].reshape(4, 10)
            q1 = vector[40:50]
            p2 = vector[50:60]
            q2 = float(vector[60])
            return loss_and_gradient(X, y, p1, q1, p2, q2, 0.1)[0]

        numeric = np.empty_like(flat)
        for j in range(flat.size):
            up = flat.copy(); up[j] += step
            down = flat.copy(); down[j] -= step
            numeric[j] = (loss_of(up) - loss_of(down)) / (2 * step)
        relative = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))
        worst = max(worst, float(relative.max()))
        assert relative.max() < 1e-5
    _passed(5, f"10/10 gradient checks pass, worst relative error {worst:.2e}")


def test_criterion_06_forest_memorization():
    rng = np.random.default_rng(300)
    m = matrix_from_columns({f"f{j}": rng.standard_normal(50) for j in range(9)})
    labels = rng.integers(0, 2, 50)
    fitted = fit_forest(m, labels, ForestConfig(tree_count=1, bootstrap=False, seed=4))
    assert fitted.features_per_split == 3
    predictions = predict_forest(fitted, m, labels)
    accuracy = float(np.mean(predictions.label == labels))
    assert accuracy == 1.0
    _passed(6, "single unbagged tree memorizes 50 unique rows (mtry=3 at p=9)")


def test_criterion_07_metrics_identities():
    label = np.array([1] * 4 + [0] * 6)
    truth = np.array([1, 1, 1, 0, 1, 1, 0, 0, 0, 0])
    report = classification_metrics(
        PredictionSet(probability=label.astype(float), label=label, truth=truth,
                      raw=label.astype(float))
    )
    assert (report.tp, report.fp, report.fn, report.tn) == (3, 1, 2, 4)
    assert abs(report.accuracy - 0.7) < 1e-15
    assert abs(report.precision - 0.75) < 1e-15
    assert abs(report.recall - 0.6) < 1e-15
    assert abs(report.f1 - 2 / 3) < 1e-15
    zeros = np.zeros(4, dtype=int)
    truth0 = np.array([1, 1, 0, 0])
    empty = classification_metrics(
        PredictionSet(probability=zeros.astype(float), label=zeros, truth=truth0,
                      raw=zeros.astype(float))
    )
    assert empty.precision == 0.0 and empty.f1 == 0.0
    _passed(7, "hand-computed (3,1,2,4) metrics and zero-denominator convention hold")


def test_criterion_08_shared_folds_and_reproducibility():
    encoded, _ = _encoded_synthetic(seed=8, total=288)
    seen = {}

    def observer(label, model_name, folds):
        seen.setdefault(label, []).append(folds)

    kwargs = dict(
        forest_cfg=ForestConfig(tree_count=30, seed=42),
        mlp_cfg=MlpConfig(seed=42),
        k=10,
        seed=42,
    )
    first = benchmark_suite([("synthetic", encoded)], _builtin(),
                            fold_observer=observer, **kwargs)
    for label, folds_list in seen.items():
        assert len(folds_list) == 3, label
        assert folds_list[1] is folds_list[0] and folds_list[2] is folds_list[0]
    second = benchmark_suite([("synthetic", encoded)], _builtin(), **kwargs)
    assert benchmark_table_to_dict(first) == benchmark_table_to_dict(second)
    _passed(8, "SEM/RF/MLP share FoldAssignment objects; seed-42 reruns are bit-identical")


def test_criterion_09_end_to_end_benchmark():
    cfg = default_synth_config(seed=42)
    assert [s.n for s in cfg.studies] == [432, 144, 144, 432]
    encoded, _ = _encoded_synthetic(seed=42, cfg=cfg)
    start = time.perf_counter()
    table = benchmark_suite(
        [("synthetic", encoded)],
        _builtin(),
        forest_cfg=ForestConfig(tree_count=500, seed=42),
        mlp_cfg=MlpConfig(seed=42),
        k=10,
        seed=42,
    )
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0, f"benchmark took {elapsed:.1f}s"
    combined = table.rows[-1]
    assert combined.label == "Combined" and combined.n == 1152
    for row in table.rows:
        for report in row.metrics.values():
            for value in (report.accuracy, report.precision, report.recall, report.f1):
                assert 0.0 <= value <= 1.0

    strong = default_synth_config(seed=43)
    strong.true_paths = {"Object": 0.35, "Scene": 0.45, "User_State": -0.5}
    encoded_strong, _ = _encoded_synthetic(seed=43, cfg=strong)
    labels = encoded_strong.column("recall")
    positives = float(labels.mean())
    baseline_f1 = 2 * positives / (positives + 1.0)
    strong_table = benchmark_suite(
        [("strong", encoded_strong)],
        _builtin(),
        forest_cfg=ForestConfig(tree_count=150, seed=42),
        mlp_cfg=MlpConfig(seed=42),
        k=10,
        seed=42,
    )
    for name, report in strong_table.rows[0].metrics.items():
        assert report.f1 > baseline_f1, (name, report.f1, baseline_f1)
    _passed(9, f"1152-row benchmark well-formed in {elapsed:.1f}s; "
               f"all models beat the all-positive F1 {baseline_f1:.3f} on strong signal")


def test_criterion_10_pooled_fallback_standardization():
    encoded, cfg = _encoded_synthetic(seed=10, total=576)
    alerted = {s.label: s.alerted for s in cfg.studies}
    assert [alerted[k] for k in sorted(alerted)] == [False, False, False, True]
    standardized, params = standardize_within_group(encoded)
    fitted = fit_pls(standardized, _builtin(), params)
    fallback_pairs = set(fitted.standardization.fallbacks)
    assert {
        ("study1", "user_alerted_recall"),
        ("study2", "user_alerted_recall"),
        ("study3", "user_alerted_recall"),
        ("study4", "user_alerted_recall"),
    } <= fallback_pairs
    _passed(10, "study-constant boolean fits via pooled fallback and is recorded")


def test_criterion_11_sensitivity_consistency():
    encoded, _ = _encoded_synthetic(seed=11, total=288)
    standardized, params = standardize_within_group(encoded)
    fitted = fit_pls(standardized, _builtin(), params)
    baseline = predict_pls(fitted, encoded)
    candidates = np.nonzero(
        (baseline.probability > 0.2) & (baseline.probability < 0.8)
    )[0]
    assert candidates.size > 0
    checked = 0
    for idx in candidates[:5]:
        base = encoded.take_rows([idx])
        report = sensitivity_levers(fitted, base, delta=0.5)
        group = base.meta_values("study")[0]
        effects = {e.indicator: e.effect for e in report.effects}
        for column, effect in effects.items():
            bumped = base.take_rows([0])
            j = bumped.column_names.index(column)
            bumped.values[0, j] += 0.5 * fitted.standardization.lookup(group, column).sd
            prediction = predict_pls(fitted, bumped)
            if not (0.0 < prediction.raw[0] < 1.0 and 0.0 < baseline.raw[idx] < 1.0):
                continue  # clamped; the identity only holds unclamped
            difference = prediction.raw[0] - baseline.raw[idx]
            assert abs(effect - difference) < 1e-10, column
            checked += 1
    assert checked >= 20
    _passed(11, f"{checked} lever effects equal prediction finite differences to 1e-10")
