"""Shared cross-validation folds, metrics, the benchmark runner, and
participant/object recall aggregation.

All three models (SEM, RF, MLP) are evaluated on identical fold
assignments with the shared >= 0.5 label rule; metrics are computed once
over the pooled out-of-fold predictions (micro pooling).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import (
    ForestConfig,
    MlpConfig,
    fit_forest,
    fit_mlp,
    predict_forest,
    predict_mlp,
)
from .dataset import (
    EncodedMatrix,
    RawTable,
    apply_standardization,
    standardize_within_group,
)
from .errors import DataError, PathlensError
from .model_spec import ValidatedModel
from .pls import fit_pls, predict_pls
from .predictions import PredictionSet, pool_predictions

log = logging.getLogger(__name__)

MODEL_ORDER = ("SEM", "RF", "MLP")


@dataclass(frozen=True)
class FoldAssignment:
    n: int
    k: int
    assignment: np.ndarray  # per-row fold index in [0, k)
    seed: int


def make_folds(
    n: int, k: int, seed: int, labels=None, stratified: bool = False
) -> FoldAssignment:
    """Deterministic shuffled partition into k folds of near-equal size.

    Plain random by default; pass stratified=True with labels to balance
    classes across folds.
    """
    if k < 2:
        raise DataError("need at least 2 folds")
    if k > n:
        raise DataError(f"cannot make {k} folds from {n} rows")
    rng = np.random.default_rng([seed, n, k])
    assignment = np.empty(n, dtype=np.int64)
    if stratified:
        if labels is None:
            raise DataError("stratified folds require labels")
        labels = np.asarray(labels)
        offset = 0
        for cls in np.unique(labels):
            idx = np.nonzero(labels == cls)[0]
            perm = rng.permutation(idx)
            assignment[perm] = (offset + np.arange(len(idx))) % k
            offset += len(idx)
    else:
        perm = rng.permutation(n)
        assignment[perm] = np.arange(n) % k
    return FoldAssignment(n=n, k=k, assignment=assignment, seed=seed)


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.default_rng([seed, fold]).integers(1 << 63))


class PlsRunner:
    name = "SEM"

    def __init__(self, model: ValidatedModel, group_column: str = "study"):
        self.model = model
        self.group_column = group_column

    def fit(self, train: EncodedMatrix, seed: int):
        standardized, params = standardize_within_group(train, self.group_column)
        return fit_pls(standardized, self.model, params)

    def predict(self, fitted, test: EncodedMatrix) -> PredictionSet:
        return predict_pls(fitted, test)


class ForestRunner:
    name = "RF"

    def __init__(self, cfg: ForestConfig, outcome_column: str = "recall"):
        self.cfg = cfg
        self.outcome_column = outcome_column

    def _features(self, m: EncodedMatrix) -> EncodedMatrix:
        return m.take_columns(
            [c for c in m.column_names if c != self.outcome_column]
        )

    def fit(self, train: EncodedMatrix, seed: int):
        labels = train.column(self.outcome_column).astype(np.int64)
        return fit_forest(self._features(train), labels, replace(self.cfg, seed=seed))

    def predict(self, fitted, test: EncodedMatrix) -> PredictionSet:
        truth = test.column(self.outcome_column).astype(np.int64)
        return predict_forest(fitted, self._features(test), truth)


class MlpRunner:
    name = "MLP"

    def __init__(
        self,
        cfg: MlpConfig,
        outcome_column: str = "recall",
        group_column: str = "study",
    ):
        self.cfg = cfg
        self.outcome_column = outcome_column
        self.group_column = group_column

    def _features(self, m: EncodedMatrix) -> EncodedMatrix:
        return m.take_columns(
            [c for c in m.column_names if c != self.outcome_column]
        )

    def fit(self, train: EncodedMatrix, seed: int):
        features, params = standardize_within_group(
            self._features(train), self.group_column
        )
        labels = train.column(self.outcome_column).astype(np.int64)
        model = fit_mlp(features, labels, replace(self.cfg, seed=seed))
        model.standardization = params
        return model

    def predict(self, fitted, test: EncodedMatrix) -> PredictionSet:
        features = apply_standardization(
            self._features(test), fitted.standardization
        )
        truth = test.column(self.outcome_column).astype(np.int64)
        return predict_mlp(fitted, features, truth)


def cross_validate(
    data: EncodedMatrix, runner, folds: FoldAssignment
) -> PredictionSet:
    """Out-of-fold predictions for every row, pooled in row order.

    Each fold re-fits on its complement (including re-estimating any
    standardization on the training split only) and predicts the held-out
    rows; fit failures are annotated with the fold index.
    """
    if folds.n != data.n_rows:
        raise DataError(f"fold assignment for {folds.n} rows, data has {data.n_rows}")
    parts = []
    for fold in range(folds.k):
        test_idx = np.nonzero(folds.assignment == fold)[0]
        train_idx = np.nonzero(folds.assignment != fold)[0]
        try:
            fitted = runner.fit(data.take_rows(train_idx), _fold_seed(folds.seed, fold))
            predictions = runner.predict(fitted, data.take_rows(test_idx))
        except PathlensError as exc:
            raise type(exc)(f"fold {fold}: {exc}") from exc
        parts.append(
            PredictionSet(
                probability=predictions.probability,
                label=predictions.label,
                truth=predictions.truth,
                raw=predictions.raw,
                row_index=test_idx,
            )
        )
    return pool_predictions(parts)


@dataclass(frozen=True)
class MetricsReport:
    tp: int
    fp: int
    fn: int
    tn: int
    accuracy: float
    precision: float
    recall: float
    f1: float


def classification_metrics(p: PredictionSet) -> MetricsReport:
    """Standard binary metrics with the zero-denominator convention of 0."""
    if len(p) == 0:
        raise DataError("empty prediction set")
    tp = int(np.sum((p.label == 1) & (p.truth == 1)))
    fp = int(np.sum((p.label == 1) & (p.truth == 0)))
    fn = int(np.sum((p.label == 0) & (p.truth == 1)))
    tn = int(np.sum((p.label == 0) & (p.truth == 0)))
    n = tp + fp + fn + tn
    if n != len(p):
        raise DataError("prediction set contains labels outside {0, 1}")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall
        else 0.0
    )
    return MetricsReport(
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
        accuracy=(tp + tn) / n,
        precision=precision,
        recall=recall,
        f1=f1,
    )


@dataclass
class BenchmarkRow:
    label: str
    n: int
    metrics: dict[str, MetricsReport]  # per model name
    best: str  # best model(s) by F1, ties joined with "/"


@dataclass
class BenchmarkTable:
    rows: list[BenchmarkRow]
    k: int
    seed: int


def _drop_zero_variance(m: EncodedMatrix, outcome_column: str) -> EncodedMatrix:
    keep = []
    for j, name in enumerate(m.column_names):
        sd = float(np.std(m.values[:, j], ddof=1))
        if sd <= 1e-12 and name != outcome_column:
            log.warning("benchmark: dropping zero-variance column %r", name)
            continue
        keep.append(name)
    return m if len(keep) == len(m.column_names) else m.take_columns(keep)


def concat_matrices(matrices: list[EncodedMatrix]) -> EncodedMatrix:
    first = matrices[0]
    aligned = [first]
    for m in matrices[1:]:
        if set(m.column_names) != set(first.column_names):
            raise DataError("datasets have differing column sets")
        aligned.append(
            m if m.column_names == first.column_names else m.take_columns(first.column_names)
        )
    return EncodedMatrix(
        values=np.vstack([m.values for m in aligned]),
        column_names=list(first.column_names),
        row_meta=[meta for m in aligned for meta in m.row_meta],
    )


def benchmark_suite(
    datasets: list[tuple[str, EncodedMatrix]],
    model: ValidatedModel,
    forest_cfg: ForestConfig | None = None,
    mlp_cfg: MlpConfig | None = None,
    k: int = 10,
    seed: int = 42,
    group_column: str = "study",
    fold_observer=None,
) -> BenchmarkTable:
    """Run SEM, RF, and MLP on identical folds per dataset plus Combined.

    The Combined row refits pooled data. Zero-variance indicator columns on
    a subset are dropped with a warning before fitting. `fold_observer`,
    when given, is called as fold_observer(dataset_label, model_name,
    FoldAssignment) for instrumentation.
    """
    if not datasets:
        raise DataError("benchmark_suite needs at least one dataset")
    forest_cfg = forest_cfg or ForestConfig(seed=seed)
    mlp_cfg = mlp_cfg or MlpConfig(seed=seed)
    outcome_column = model.spec.construct(model.outcome).indicators[0].name

    jobs = list(datasets)
    if len(datasets) > 1:
        jobs.append(("Combined", concat_matrices([m for _, m in datasets])))

    rows = []
    fold_cache: dict[str, FoldAssignment] = {}
    for label, matrix in jobs:
        pruned = _drop_zero_variance(matrix, outcome_column)
        folds = make_folds(pruned.n_rows, k, seed)
        runners = [
            PlsRunner(model, group_column),
            ForestRunner(forest_cfg, outcome_column),
            MlpRunner(mlp_cfg, outcome_column, group_column),
        ]
        metrics: dict[str, MetricsReport] = {}
        for runner in runners:
            if fold_observer is not None:
                fold_observer(label, runner.name, folds)
            try:
                pooled = cross_validate(pruned, runner, folds)
            except PathlensError as exc:
                raise type(exc)(f"dataset {label!r}, model {runner.name}: {exc}") from exc
            metrics[runner.name] = classification_metrics(pooled)
        best_f1 = max(report.f1 for report in metrics.values())
        best = "/".join(
            name for name in MODEL_ORDER if metrics[name].f1 == best_f1
        )
        rows.append(BenchmarkRow(label=label, n=pruned.n_rows, metrics=metrics, best=best))
        fold_cache[label] = folds

    if len(datasets) == 1:
        # With a single dataset the pooled matrix is that dataset, so the
        # Combined row would repeat the exact same fits; reuse them.
        first = rows[0]
        if fold_observer is not None:
            for name in MODEL_ORDER:
                fold_observer("Combined", name, fold_cache[first.label])
        rows.append(
            BenchmarkRow(
                label="Combined", n=first.n, metrics=dict(first.metrics), best=first.best
            )
        )

    return BenchmarkTable(rows=rows, k=k, seed=seed)


def benchmark_table_to_dict(table: BenchmarkTable) -> dict:
    return {
        "k": table.k,
        "seed": table.seed,
        "rows": [
            {
                "label": row.label,
                "n": row.n,
                "best_by_f1": row.best,
                "models": {
                    name: {
                        "accuracy": report.accuracy,
                        "precision": report.precision,
                        "recall": report.recall,
                        "f1": report.f1,
                        "tp": report.tp,
                        "fp": report.fp,
                        "fn": report.fn,
                        "tn": report.tn,
                    }
                    for name, report in row.metrics.items()
                },
            }
            for row in table.rows
        ],
    }


def render_benchmark_text(table: BenchmarkTable) -> str:
    """Aligned plain-text table mirroring the benchmark layout."""
    header = ["Study", "N"]
    for name in MODEL_ORDER:
        header += [f"{name} Acc", f"{name} F1"]
    header.append("Best (by F1)")

    body = []
    for row in table.rows:
        cells = [row.label, str(row.n)]
        for name in MODEL_ORDER:
            report = row.metrics[name]
            cells += [f"{report.accuracy:.3f}", f"{report.f1:.3f}"]
        cells.append(row.best)
        body.append(cells)

    widths = [
        max(len(line[i]) for line in [header] + body) for i in range(len(header))
    ]

    def fmt(cells):
        return "  ".join(cell.ljust(width) for cell, width in zip(cells, widths)).rstrip()

    rule = "-" * (sum(widths) + 2 * (len(widths) - 1))
    lines = [fmt(header), rule]
    lines += [fmt(cells) for cells in body[:-1]]
    lines.append(rule)
    lines.append(fmt(body[-1]))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class GroupRecall:
    recalled: int
    probed: int

    @property
    def fraction(self) -> float:
        return self.recalled / self.probed


@dataclass
class RangeReport:
    participants: dict[tuple[str, str], GroupRecall]
    objects: dict[tuple[str, str], GroupRecall]
    study_ranges: dict[str, dict[str, dict[str, float]]] = field(default_factory=dict)


def recall_aggregates(data: RawTable) -> RangeReport:
    """Per-participant and per-object recall fractions with per-study ranges."""
    for column in ("study", "participant", "object", "recall"):
        if column not in data.columns:
            raise DataError(f"missing required column {column!r}")
    if not data.rows:
        raise DataError("empty table")

    participants: dict[tuple[str, str], list[int]] = {}
    objects: dict[tuple[str, str], list[int]] = {}
    for row in data.rows:
        outcome = int(row["recall"])
        participants.setdefault((row["study"], row["participant"]), []).append(outcome)
        objects.setdefault((row["study"], row["object"]), []).append(outcome)

    report = RangeReport(
        participants={
            key: GroupRecall(sum(values), len(values))
            for key, values in participants.items()
        },
        objects={
            key: GroupRecall(sum(values), len(values))
            for key, values in objects.items()
        },
    )

    studies = sorted({key[0] for key in report.participants})
    for study in studies:
        summary = {}
        for kind, table in (("participants", report.participants), ("objects", report.objects)):
            fractions = [
                group.fraction for key, group in table.items() if key[0] == study
            ]
            summary[kind] = {
                "min": min(fractions),
                "max": max(fractions),
                "range": max(fractions) - min(fractions),
            }
        report.study_ranges[study] = summary
    return report


def range_report_to_dict(report: RangeReport) -> dict:
    return {
        "participants": {
            f"{study}/{participant}": {
                "recalled": group.recalled,
                "probed": group.probed,
                "fraction": group.fraction,
            }
            for (study, participant), group in sorted(report.participants.items())
        },
        "objects": {
            f"{study}/{obj}": {
                "recalled": group.recalled,
                "probed": group.probed,
                "fraction": group.fraction,
            }
            for (study, obj), group in sorted(report.objects.items())
        },
        "study_ranges": report.study_ranges,
    }
