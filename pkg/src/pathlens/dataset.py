"""CSV ingestion, indicator encoding, and within-group standardization.

The pipeline is: ingest_csv (listwise deletion) -> encode_indicators
(dummy/boolean encoding) -> standardize_within_group (per-study z-scores
with a pooled fallback for columns that are constant inside a group).
Standardization parameters are frozen at fit time and replayed verbatim on
test rows by apply_standardization.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .model_spec import ModelSpec

log = logging.getLogger(__name__)

IDENTITY_COLUMNS = ("study", "participant", "object")

# Known categorical domains from the CSV schema. Categoricals not listed
# here get their levels inferred from the data (reference level first,
# remaining levels sorted).
CATEGORICAL_LEVELS = {"object_virtuality": ("physical", "virtual", "twin")}

_BOOLEAN_TOKENS = {"true": 1.0, "false": 0.0, "1": 1.0, "0": 0.0}

# Relative threshold below which a sample standard deviation is treated as
# zero variance.
_SD_EPS = 1e-12


@dataclass
class RawTable:
    """String-valued rows straight from a CSV, after listwise deletion."""

    rows: list[dict[str, str]]
    columns: list[str]
    dropped: int = 0

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class EncodedMatrix:
    """Numeric indicator matrix with per-row provenance."""

    values: np.ndarray  # (n, p) float64
    column_names: list[str]
    row_meta: list[tuple[str, str, str]]  # (study, participant, object)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.column_names.index(name)]
        except ValueError:
            raise DataError(f"column {name!r} not present") from None

    def meta_values(self, key: str) -> list[str]:
        idx = IDENTITY_COLUMNS.index(key)
        return [meta[idx] for meta in self.row_meta]

    def take_rows(self, indices) -> "EncodedMatrix":
        indices = np.asarray(indices)
        return EncodedMatrix(
            values=self.values[indices].copy(),
            column_names=list(self.column_names),
            row_meta=[self.row_meta[i] for i in indices],
        )

    def take_columns(self, names: list[str]) -> "EncodedMatrix":
        idx = [self.column_names.index(n) for n in names]
        return EncodedMatrix(
            values=self.values[:, idx].copy(),
            column_names=list(names),
            row_meta=list(self.row_meta),
        )


@dataclass(frozen=True)
class ColumnParams:
    mean: float
    sd: float
    source: str  # "group" or "pooled"


@dataclass
class StandardizationParams:
    """Frozen per-(group, column) means/sds plus pooled fallbacks."""

    group_column: str
    by_group: dict[tuple[str, str], ColumnParams]
    pooled: dict[str, ColumnParams]
    fallbacks: list[tuple[str, str]] = field(default_factory=list)
    dropped_columns: list[str] = field(default_factory=list)

    def lookup(self, group: str, column: str) -> ColumnParams:
        params = self.by_group.get((group, column))
        if params is None:
            params = self.pooled.get(column)
            if params is None or params.sd <= 0.0:
                raise DataError(
                    f"no usable standardization params for group {group!r}, "
                    f"column {column!r}"
                )
        return params


def _required_columns(spec: ModelSpec) -> list[str]:
    columns = list(IDENTITY_COLUMNS)
    for construct in spec.constructs:
        for ind in construct.indicators:
            columns.append(ind.name)
    return columns


def _parseable(value: str, kind: str) -> bool:
    if kind in ("numeric",):
        try:
            return math.isfinite(float(value))
        except ValueError:
            return False
    if kind == "boolean":
        return value.strip().lower() in _BOOLEAN_TOKENS
    if kind == "binary-outcome":
        return value.strip() in ("0", "1")
    return True  # categorical: any non-empty token parses; levels checked at encode


def ingest_csv(path, spec: ModelSpec) -> RawTable:
    """Read a recall CSV and apply listwise deletion.

    Rows with any empty or unparseable required field are dropped; the drop
    count is recorded on the returned table. Missing required columns and an
    empty post-deletion table raise DataError.
    """
    kinds = {
        ind.name: ind.kind for c in spec.constructs for ind in c.indicators
    }
    required = _required_columns(spec)

    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"missing required column(s): {', '.join(missing)}")
        kept: list[dict[str, str]] = []
        dropped = 0
        for row in reader:
            ok = True
            for column in required:
                value = (row.get(column) or "").strip()
                if not value or not _parseable(value, kinds.get(column, "identity")):
                    ok = False
                    break
            if ok:
                kept.append({c: row[c].strip() for c in header})
            else:
                dropped += 1

    if not kept:
        raise DataError(f"no complete rows left in {path} after listwise deletion")
    if dropped:
        log.info("ingest %s: dropped %d incomplete row(s)", path, dropped)

    if "exposure_time_normalized" in kinds:
        for row in kept:
            value = float(row["exposure_time_normalized"])
            if not 0.0 <= value <= 1.0:
                raise DataError(
                    f"exposure_time_normalized={value} outside [0, 1]; the "
                    "column must be pre-normalized by the data producer"
                )

    return RawTable(rows=kept, columns=list(header), dropped=dropped)


def categorical_levels(indicator_name: str, reference: str, observed) -> list[str]:
    """Non-reference levels in encoding order for a categorical indicator."""
    known = CATEGORICAL_LEVELS.get(indicator_name)
    if known is not None:
        return [level for level in known if level != reference]
    return sorted(set(observed) - {reference})


def encode_indicators(raw: RawTable, spec: ModelSpec) -> EncodedMatrix:
    """Expand indicators to numeric columns in model declaration order.

    Categoricals with L levels become L-1 dummy columns named
    <indicator><level> against the reference level; booleans map to 0/1;
    numerics pass through.
    """
    columns: list[str] = []
    data: list[np.ndarray] = []
    n = len(raw.rows)

    for construct in spec.constructs:
        for ind in construct.indicators:
            raw_values = [row[ind.name] for row in raw.rows]
            if ind.kind == "categorical":
                known = CATEGORICAL_LEVELS.get(ind.name)
                levels = categorical_levels(ind.name, ind.reference_level, raw_values)
                allowed = set(levels) | {ind.reference_level}
                for value in raw_values:
                    if value not in allowed or (known and value not in known):
                        raise DataError(
                            f"unknown categorical level {value!r} for {ind.name!r}"
                        )
                for level in levels:
                    columns.append(f"{ind.name}{level}")
                    data.append(
                        np.fromiter(
                            (1.0 if v == level else 0.0 for v in raw_values),
                            dtype=np.float64,
                            count=n,
                        )
                    )
            elif ind.kind == "boolean":
                out = np.empty(n)
                for i, value in enumerate(raw_values):
                    token = value.strip().lower()
                    if token not in _BOOLEAN_TOKENS:
                        raise DataError(
                            f"invalid boolean {value!r} in column {ind.name!r}"
                        )
                    out[i] = _BOOLEAN_TOKENS[token]
                columns.append(ind.name)
                data.append(out)
            elif ind.kind == "binary-outcome":
                out = np.empty(n)
                for i, value in enumerate(raw_values):
                    if value.strip() not in ("0", "1"):
                        raise DataError(
                            f"outcome column {ind.name!r} must be 0/1, got {value!r}"
                        )
                    out[i] = float(value)
                columns.append(ind.name)
                data.append(out)
            else:  # numeric
                out = np.empty(n)
                for i, value in enumerate(raw_values):
                    try:
                        out[i] = float(value)
                    except ValueError:
                        raise DataError(
                            f"non-numeric value {value!r} in numeric column {ind.name!r}"
                        ) from None
                columns.append(ind.name)
                data.append(out)

    meta = [
        (row["study"], row["participant"], row["object"]) for row in raw.rows
    ]
    return EncodedMatrix(
        values=np.column_stack(data), column_names=columns, row_meta=meta
    )


def _sample_stats(values: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(values))
    sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    if sd <= _SD_EPS * max(1.0, abs(mean)):
        sd = 0.0
    return mean, sd


def standardize_within_group(
    m: EncodedMatrix,
    group_column: str = "study",
    drop_constant: bool = False,
) -> tuple[EncodedMatrix, StandardizationParams]:
    """Standardize every column to mean 0 / sample sd 1 within each group.

    Columns that are constant within a group but vary pooled fall back to
    pooled mean/sd for that (group, column); the fallback is recorded.
    Columns with zero pooled variance raise DataError unless drop_constant
    is set, in which case they are dropped with a warning.
    """
    groups = m.meta_values(group_column)
    group_labels = sorted(set(groups))
    group_rows = {
        g: np.array([i for i, gi in enumerate(groups) if gi == g]) for g in group_labels
    }
    for g, rows in group_rows.items():
        if rows.size < 2:
            raise DataError(f"group {g!r} has fewer than 2 rows")

    pooled: dict[str, ColumnParams] = {}
    keep: list[int] = []
    dropped: list[str] = []
    for j, name in enumerate(m.column_names):
        mean, sd = _sample_stats(m.values[:, j])
        pooled[name] = ColumnParams(mean, sd, "pooled")
        if sd == 0.0:
            if drop_constant:
                dropped.append(name)
                log.warning(
                    "dropping column %r: zero variance on this subset", name
                )
                continue
            raise DataError(
                f"column {name!r} has zero variance both within every group "
                "and pooled"
            )
        keep.append(j)

    kept_names = [m.column_names[j] for j in keep]
    out = np.empty((m.n_rows, len(keep)))
    by_group: dict[tuple[str, str], ColumnParams] = {}
    fallbacks: list[tuple[str, str]] = []

    for col_out, j in enumerate(keep):
        name = m.column_names[j]
        for g in group_labels:
            rows = group_rows[g]
            mean, sd = _sample_stats(m.values[rows, j])
            if sd == 0.0:
                params = ColumnParams(pooled[name].mean, pooled[name].sd, "pooled")
                fallbacks.append((g, name))
            else:
                params = ColumnParams(mean, sd, "group")
            by_group[(g, name)] = params
            out[rows, col_out] = (m.values[rows, j] - params.mean) / params.sd

    standardized = EncodedMatrix(
        values=out, column_names=kept_names, row_meta=list(m.row_meta)
    )
    params = StandardizationParams(
        group_column=group_column,
        by_group=by_group,
        pooled=pooled,
        fallbacks=fallbacks,
        dropped_columns=dropped,
    )
    return standardized, params


def apply_standardization(
    m: EncodedMatrix, params: StandardizationParams
) -> EncodedMatrix:
    """Replay stored standardization on new rows; never re-estimates.

    Rows from groups unseen at fit time use the pooled fallback.
    """
    for name in m.column_names:
        if name not in params.pooled:
            raise DataError(f"column {name!r} has no stored standardization params")
    groups = m.meta_values(params.group_column)
    out = np.empty_like(m.values)
    for j, name in enumerate(m.column_names):
        for i, g in enumerate(groups):
            p = params.lookup(g, name)
            out[i, j] = (m.values[i, j] - p.mean) / p.sd
    return EncodedMatrix(
        values=out, column_names=list(m.column_names), row_meta=list(m.row_meta)
    )


def construct_blocks(
    spec: ModelSpec, column_names: list[str]
) -> dict[str, list[str]]:
    """Map each construct to its encoded columns present in column_names.

    Columns dropped upstream (e.g. zero variance on a study subset) simply
    shrink the block; a construct whose block would be empty is an error.
    """
    present = set(column_names)
    blocks: dict[str, list[str]] = {}
    for construct in spec.constructs:
        block: list[str] = []
        for ind in construct.indicators:
            if ind.kind == "categorical":
                prefix = ind.name
                block.extend(
                    name
                    for name in column_names
                    if name.startswith(prefix) and name != prefix
                )
            elif ind.name in present:
                block.append(ind.name)
        if not block:
            raise DataError(
                f"construct {construct.name!r} has no usable indicator columns"
            )
        blocks[construct.name] = block
    return blocks


def write_csv(raw: RawTable, path) -> None:
    """Write a RawTable back to CSV with a deterministic byte layout."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=raw.columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(raw.rows)
