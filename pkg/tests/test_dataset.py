import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import matrix_from_columns
from pathlens.dataset import (
    EncodedMatrix,
    apply_standardization,
    construct_blocks,
    encode_indicators,
    ingest_csv,
    standardize_within_group,
    write_csv,
)
from pathlens.errors import DataError
from pathlens.model_spec import builtin_recall_model
from pathlens.synth import CSV_COLUMNS, default_synth_config, generate_synthetic


def _write(tmp_path, rows, columns=CSV_COLUMNS, name="data.csv"):
    path = tmp_path / name
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)
    return path


def _complete_row(**overrides):
    row = {
        "study": "study1",
        "participant": "p1",
        "object": "o1",
        "recall": "1",
        "object_virtuality": "physical",
        "object_congruence": "true",
        "scene_lighting": "0.2",
        "scene_congruence": "-1.1",
        "exposure_time_normalized": "0.5",
        "task_focus": "0.0",
        "task_audio": "1.0",
        "user_alerted_recall": "false",
        "ar_familiarity": "0.1",
        "vr_familiarity": "0.3",
    }
    row.update(overrides)
    return row


def test_ingest_listwise_deletion(tmp_path):
    rows = [
        _complete_row(object="o1"),
        _complete_row(object="o2", task_focus=""),          # empty field
        _complete_row(object="o3", scene_lighting="nan"),   # non-finite
        _complete_row(object="o4", recall="2"),             # bad outcome token
        _complete_row(object="o5"),
    ]
    table = ingest_csv(_write(tmp_path, rows), builtin_recall_model())
    assert len(table) == 2
    assert table.dropped == 3
    assert [r["object"] for r in table.rows] == ["o1", "o5"]


def test_ingest_missing_column(tmp_path):
    columns = [c for c in CSV_COLUMNS if c != "task_audio"]
    row = _complete_row()
    del row["task_audio"]
    with pytest.raises(DataError, match="task_audio"):
        ingest_csv(_write(tmp_path, [row], columns), builtin_recall_model())


def test_ingest_all_rows_dropped(tmp_path):
    with pytest.raises(DataError, match="no complete rows"):
        ingest_csv(
            _write(tmp_path, [_complete_row(task_focus="")]), builtin_recall_model()
        )


def test_ingest_exposure_range_checked(tmp_path):
    rows = [_complete_row(exposure_time_normalized="1.5")]
    with pytest.raises(DataError, match="exposure_time_normalized"):
        ingest_csv(_write(tmp_path, rows), builtin_recall_model())


def test_encode_builtin_column_layout(tmp_path):
    rows = [
        _complete_row(object="o1", object_virtuality="physical"),
        _complete_row(object="o2", object_virtuality="virtual"),
        _complete_row(object="o3", object_virtuality="twin", object_congruence="0"),
    ]
    spec = builtin_recall_model()
    encoded = encode_indicators(ingest_csv(_write(tmp_path, rows), spec), spec)
    assert encoded.column_names == [
        "object_virtualityvirtual",
        "object_virtualitytwin",
        "object_congruence",
        "scene_lighting",
        "scene_congruence",
        "exposure_time_normalized",
        "user_alerted_recall",
        "task_focus",
        "task_audio",
        "ar_familiarity",
        "vr_familiarity",
        "recall",
    ]
    # physical is the reference level: both dummies zero on the first row
    assert encoded.values[0, 0] == 0.0 and encoded.values[0, 1] == 0.0
    assert encoded.values[1, 0] == 1.0 and encoded.values[1, 1] == 0.0
    assert encoded.values[2, 1] == 1.0
    assert encoded.values[:, 2].tolist() == [1.0, 1.0, 0.0]


def test_encode_rejects_unknown_level(tmp_path):
    rows = [_complete_row(object_virtuality="hologram")]
    spec = builtin_recall_model()
    with pytest.raises(DataError, match="hologram"):
        encode_indicators(ingest_csv(_write(tmp_path, rows), spec), spec)


def test_standardize_within_group_moments():
    rng = np.random.default_rng(0)
    m = EncodedMatrix(
        values=rng.standard_normal((40, 3)) * [2.0, 5.0, 0.1] + [1.0, -3.0, 0.0],
        column_names=["a", "b", "c"],
        row_meta=[("g1" if i < 25 else "g2", f"p{i}", "o") for i in range(40)],
    )
    standardized, params = standardize_within_group(m)
    for g, rows in (("g1", slice(0, 25)), ("g2", slice(25, 40))):
        block = standardized.values[rows]
        assert np.allclose(block.mean(axis=0), 0.0, atol=1e-12)
        assert np.allclose(block.std(axis=0, ddof=1), 1.0, atol=1e-12)
    assert params.fallbacks == []
    assert all(p.source == "group" for p in params.by_group.values())


def test_standardize_pooled_fallback_for_group_constant():
    m = EncodedMatrix(
        values=np.column_stack(
            [
                np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0]),   # constant per group
                np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            ]
        ),
        column_names=["alerted", "x"],
        row_meta=[("g1" if i < 3 else "g2", f"p{i}", "o") for i in range(6)],
    )
    standardized, params = standardize_within_group(m)
    assert set(params.fallbacks) == {("g1", "alerted"), ("g2", "alerted")}
    assert params.by_group[("g1", "alerted")].source == "pooled"
    # both groups were scaled with the same pooled parameters
    pooled = params.pooled["alerted"]
    expected = (m.values[:, 0] - pooled.mean) / pooled.sd
    assert np.allclose(standardized.column("alerted"), expected)


def test_standardize_rejects_globally_constant_column():
    m = matrix_from_columns({"x": [1.0, 1.0, 1.0], "y": [0.0, 1.0, 2.0]})
    with pytest.raises(DataError, match="zero variance"):
        standardize_within_group(m)


def test_standardize_drop_constant_option():
    m = matrix_from_columns({"x": [1.0, 1.0, 1.0], "y": [0.0, 1.0, 2.0]})
    standardized, params = standardize_within_group(m, drop_constant=True)
    assert standardized.column_names == ["y"]
    assert params.dropped_columns == ["x"]


def test_apply_standardization_replays_training_params():
    rng = np.random.default_rng(1)
    m = matrix_from_columns({"a": rng.standard_normal(20), "b": rng.uniform(0, 9, 20)})
    standardized, params = standardize_within_group(m)
    replayed = apply_standardization(m, params)
    assert np.allclose(replayed.values, standardized.values, atol=0)


def test_apply_standardization_unseen_group_uses_pooled():
    rng = np.random.default_rng(2)
    m = matrix_from_columns({"a": rng.standard_normal(12)})
    _, params = standardize_within_group(m)
    other = matrix_from_columns({"a": [0.4, -0.2]}, study="new_group")
    replayed = apply_standardization(other, params)
    pooled = params.pooled["a"]
    assert np.allclose(
        replayed.column("a"), (other.column("a") - pooled.mean) / pooled.sd
    )


def test_construct_blocks_tolerate_dropped_columns():
    spec = builtin_recall_model()
    names = [
        "object_virtualityvirtual",
        "object_virtualitytwin",
        "object_congruence",
        "scene_lighting",
        "scene_congruence",
        "exposure_time_normalized",
        "task_focus",
        "task_audio",
        "ar_familiarity",
        "vr_familiarity",
        "recall",
    ]  # user_alerted_recall dropped upstream
    blocks = construct_blocks(spec, names)
    assert blocks["User_State"] == [
        "task_focus",
        "task_audio",
        "ar_familiarity",
        "vr_familiarity",
    ]


def test_construct_blocks_empty_block_is_error():
    spec = builtin_recall_model()
    with pytest.raises(DataError, match="Scene"):
        construct_blocks(
            spec,
            ["object_virtualityvirtual", "object_virtualitytwin",
             "object_congruence", "task_focus", "recall"],
        )


def test_write_then_ingest_round_trip(tmp_path):
    spec = builtin_recall_model()
    table = generate_synthetic(default_synth_config(seed=5))
    path = tmp_path / "round.csv"
    write_csv(table, path)
    again = ingest_csv(path, spec)
    assert again.rows == table.rows
    assert again.dropped == 0


@given(
    st.lists(
        st.floats(min_value=-1e3, max_value=1e3, allow_nan=False),
        min_size=3,
        max_size=40,
    ).filter(lambda xs: max(xs) - min(xs) > 1e-3)
)
def test_standardization_is_shift_and_scale_invariant(xs):
    m = matrix_from_columns({"x": xs})
    shifted = matrix_from_columns({"x": [3.0 * v + 7.0 for v in xs]})
    a, _ = standardize_within_group(m)
    b, _ = standardize_within_group(shifted)
    assert np.allclose(a.values, b.values, atol=1e-9)
