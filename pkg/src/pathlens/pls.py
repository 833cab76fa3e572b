"""Partial least squares path modeling with the path-weighting scheme.

Estimation alternates an inner step (temporary construct scores from
structural neighbors: predecessors weighted by multiple-regression
coefficients, successors by correlation) with an outer step (reflective
weights by correlation, formative weights by least squares of the proxy on
the indicator block), normalizing scores to unit sample variance, until the
outer weights converge. Path coefficients are then estimated by OLS on the
converged scores.

Least-squares subproblems go through numpy's lstsq (orthogonal
decomposition) rather than normal equations, for stability on collinear
formative blocks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dataset import (
    EncodedMatrix,
    StandardizationParams,
    apply_standardization,
    construct_blocks,
)
from .errors import DataError, NonConvergenceError, NumericalError
from .model_spec import PathSpec, ValidatedModel, serialize_model_spec
from .predictions import PredictionSet, threshold_labels
from .runtime import worker_count, map_indexed

log = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-7
DEFAULT_MAX_ITERATIONS = 300

POOLED_GROUP = "__pooled__"


@dataclass
class FittedPls:
    outer_weights: dict[str, dict[str, float]]
    construct_scores: np.ndarray  # training scores, (n, n_constructs)
    path_coefficients: dict[PathSpec, float]
    loadings: dict[str, dict[str, float]]
    r_squared: dict[str, float]
    standardization: StandardizationParams
    outcome_destandardization: dict[str, tuple[float, float]]
    iterations: int
    converged: bool
    max_weight_delta: float
    model: ValidatedModel
    columns: list[str]
    blocks: dict[str, list[str]]

    @property
    def outcome_column(self) -> str:
        return self.model.spec.construct(self.model.outcome).indicators[0].name

    def outcome_params(self, group: str) -> tuple[float, float]:
        return self.outcome_destandardization.get(
            group, self.outcome_destandardization[POOLED_GROUP]
        )

    def total_effects(self) -> dict[str, float]:
        """Total structural effect of each construct on the outcome."""
        effects = {name: 0.0 for name in self.model.order}
        effects[self.model.outcome] = 1.0
        for name in reversed(self.model.order):
            for succ in self.model.successors[name]:
                effects[name] += (
                    self.path_coefficients[PathSpec(name, succ)] * effects[succ]
                )
        return effects


def _unit_variance(scores: np.ndarray, what: str) -> float:
    sd = float(np.std(scores, ddof=1))
    if not np.isfinite(sd) or sd <= 0.0:
        raise NumericalError(f"zero-variance construct score for {what}")
    return sd


def _lstsq(design: np.ndarray, target: np.ndarray, what: str) -> np.ndarray:
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < design.shape[1]:
        raise NumericalError(f"singular regression in {what} (collinear columns)")
    return coef


def _corr_columns(block: np.ndarray, proxy: np.ndarray) -> np.ndarray:
    """Correlation of each standardized column with a score vector."""
    n = block.shape[0]
    proxy_c = proxy - proxy.mean()
    block_c = block - block.mean(axis=0)
    denom = np.sqrt((block_c ** 2).sum(axis=0) * (proxy_c ** 2).sum())
    with np.errstate(invalid="raise", divide="raise"):
        try:
            return (block_c.T @ proxy_c) / denom
        except FloatingPointError:
            raise NumericalError("zero-variance indicator in correlation") from None


def fit_pls(
    m: EncodedMatrix,
    model: ValidatedModel,
    standardization: StandardizationParams,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> FittedPls:
    """Estimate outer weights, construct scores, and path coefficients.

    `m` must already be standardized; `standardization` carries the frozen
    parameters so predictions can replay them on unseen rows.
    """
    spec = model.spec
    blocks = construct_blocks(spec, m.column_names)
    names = list(model.order)
    n = m.n_rows

    total_indicators = sum(len(cols) for cols in blocks.values())
    if n <= total_indicators:
        raise DataError(
            f"need more rows ({n}) than indicator columns ({total_indicators})"
        )

    col_index = {name: m.column_names.index(name) for name in m.column_names}
    block_data = {
        c: m.values[:, [col_index[col] for col in blocks[c]]] for c in names
    }
    for c in names:
        sds = np.std(block_data[c], axis=0, ddof=1)
        if np.any(sds <= 0.0):
            bad = blocks[c][int(np.argmin(sds))]
            raise NumericalError(f"zero-variance indicator column {bad!r}")

    # Equal initial weights, normalized to unit-variance scores.
    weights: dict[str, np.ndarray] = {}
    scores = np.empty((n, len(names)))
    for idx, c in enumerate(names):
        w = np.ones(len(blocks[c]))
        z = block_data[c] @ w
        sd = _unit_variance(z, c)
        weights[c] = w / sd
        scores[:, idx] = z / sd

    pos = {c: i for i, c in enumerate(names)}
    iterations = 0
    delta = np.inf
    converged = False
    while iterations < max_iterations:
        iterations += 1
        # Inner step: path-weighting proxies from current neighbor scores.
        proxies = np.zeros_like(scores)
        for c in names:
            preds = model.predecessors[c]
            succs = model.successors[c]
            proxy = np.zeros(n)
            if preds:
                design = scores[:, [pos[p] for p in preds]]
                coef = _lstsq(design, scores[:, pos[c]], f"inner step of {c!r}")
                proxy += design @ coef
            for s in succs:
                r = float(np.corrcoef(scores[:, pos[c]], scores[:, pos[s]])[0, 1])
                proxy += r * scores[:, pos[s]]
            proxies[:, pos[c]] = proxy / _unit_variance(proxy, f"proxy of {c!r}")

        # Outer step: update weights against the proxies, then renormalize.
        delta = 0.0
        for c in names:
            if spec.construct(c).mode == "reflective":
                w = _corr_columns(block_data[c], proxies[:, pos[c]])
            else:
                w = _lstsq(block_data[c], proxies[:, pos[c]], f"formative block {c!r}")
            z = block_data[c] @ w
            sd = _unit_variance(z, c)
            w = w / sd
            delta = max(delta, float(np.max(np.abs(w - weights[c]))))
            weights[c] = w
            scores[:, pos[c]] = z / sd

        if delta < tolerance:
            converged = True
            break

    if not converged:
        raise NonConvergenceError(
            f"outer weights did not converge within {max_iterations} iterations "
            f"(last max change {delta:.3e})"
        )

    # Sign convention: per construct, the sum of loadings is non-negative;
    # on an exact zero sum the first weight is non-negative.
    loadings: dict[str, dict[str, float]] = {}
    for c in names:
        lam = _corr_columns(block_data[c], scores[:, pos[c]])
        total = float(lam.sum())
        if total < 0.0 or (total == 0.0 and weights[c][0] < 0.0):
            weights[c] = -weights[c]
            scores[:, pos[c]] = -scores[:, pos[c]]
            lam = -lam
        loadings[c] = dict(zip(blocks[c], lam.tolist()))

    # Structural coefficients and R^2 by OLS on the converged scores.
    path_coefficients: dict[PathSpec, float] = {}
    r_squared: dict[str, float] = {}
    for c in names:
        preds = model.predecessors[c]
        if not preds:
            continue
        design = scores[:, [pos[p] for p in preds]]
        target = scores[:, pos[c]]
        coef = _lstsq(design, target, f"structural regression of {c!r}")
        residual = target - design @ coef
        # Scores have unit sample variance, so SS_tot = n - 1.
        r2 = 1.0 - float(residual @ residual) / (n - 1)
        r_squared[c] = min(1.0, max(0.0, r2))
        for p, b in zip(preds, coef):
            path_coefficients[PathSpec(p, c)] = float(b)

    outcome_col = spec.construct(model.outcome).indicators[0].name
    destandardization: dict[str, tuple[float, float]] = {}
    for (group, column), params in standardization.by_group.items():
        if column == outcome_col:
            destandardization[group] = (params.mean, params.sd)
    pooled = standardization.pooled.get(outcome_col)
    if pooled is None:
        raise DataError(f"outcome column {outcome_col!r} missing from standardization")
    destandardization[POOLED_GROUP] = (pooled.mean, pooled.sd)

    return FittedPls(
        outer_weights={c: dict(zip(blocks[c], weights[c].tolist())) for c in names},
        construct_scores=scores,
        path_coefficients=path_coefficients,
        loadings=loadings,
        r_squared=r_squared,
        standardization=standardization,
        outcome_destandardization=destandardization,
        iterations=iterations,
        converged=converged,
        max_weight_delta=delta,
        model=model,
        columns=list(m.column_names),
        blocks=blocks,
    )


def _aligned_columns(f: FittedPls, m: EncodedMatrix) -> EncodedMatrix:
    if set(m.column_names) != set(f.columns):
        missing = sorted(set(f.columns) - set(m.column_names))
        extra = sorted(set(m.column_names) - set(f.columns))
        raise DataError(
            f"test columns do not match training columns "
            f"(missing: {missing or '-'}, unexpected: {extra or '-'})"
        )
    if m.column_names == f.columns:
        return m
    return m.take_columns(f.columns)


def construct_scores_for(f: FittedPls, standardized: EncodedMatrix) -> np.ndarray:
    """Scores for new standardized rows using the trained outer weights."""
    col_index = {name: standardized.column_names.index(name) for name in f.columns}
    out = np.empty((standardized.n_rows, len(f.model.order)))
    for idx, c in enumerate(f.model.order):
        cols = [col_index[col] for col in f.blocks[c]]
        w = np.array([f.outer_weights[c][col] for col in f.blocks[c]])
        out[:, idx] = standardized.values[:, cols] @ w
    return out


def predict_pls(f: FittedPls, raw_test: EncodedMatrix) -> PredictionSet:
    """Out-of-sample recall probabilities for encoded (unstandardized) rows.

    Rows are standardized with the stored fit-time parameters, scored with
    the trained weights, regressed through the structural paths, and
    destandardized with the row's group outcome mean/sd. Probabilities are
    the destandardized values clamped to [0, 1]; labels use the shared
    >= 0.5 rule.
    """
    aligned = _aligned_columns(f, raw_test)
    standardized = apply_standardization(aligned, f.standardization)
    scores = construct_scores_for(f, standardized)

    pos = {c: i for i, c in enumerate(f.model.order)}
    preds = f.model.predecessors[f.model.outcome]
    beta = np.array([f.path_coefficients[PathSpec(p, f.model.outcome)] for p in preds])
    predicted_std = scores[:, [pos[p] for p in preds]] @ beta

    groups = aligned.meta_values(f.standardization.group_column)
    means = np.empty(len(groups))
    sds = np.empty(len(groups))
    for i, g in enumerate(groups):
        means[i], sds[i] = f.outcome_params(g)
    raw = means + sds * predicted_std

    truth = aligned.column(f.outcome_column).astype(np.int64)
    return PredictionSet(
        probability=np.clip(raw, 0.0, 1.0),
        label=threshold_labels(raw),
        truth=truth,
        raw=raw,
    )


@dataclass
class PathInterval:
    path: PathSpec
    point: float
    lower: float
    upper: float
    replicates: int
    retries: int = 0


def bootstrap_paths(
    m: EncodedMatrix,
    model: ValidatedModel,
    replicates: int,
    seed: int,
    group_column: str = "study",
    max_retries: int = 10,
) -> list[PathInterval]:
    """Percentile bootstrap intervals for the structural paths.

    Rows are resampled with replacement; each replicate is refit and
    sign-aligned to the full-sample solution before aggregation. Replicates
    draw independent substreams from (seed, replicate, attempt), so results
    do not depend on execution order. Degenerate resamples (e.g. a
    zero-variance column) are retried a bounded number of times.
    """
    from .dataset import standardize_within_group

    if replicates < 1:
        raise DataError("replicates must be >= 1")

    std_full, params_full = standardize_within_group(m, group_column)
    full = fit_pls(std_full, model, params_full)

    def one_replicate(i: int) -> tuple[np.ndarray, int]:
        for attempt in range(max_retries + 1):
            rng = np.random.default_rng([seed, i, attempt])
            idx = rng.integers(0, m.n_rows, m.n_rows)
            try:
                resampled = m.take_rows(idx)
                std, params = standardize_within_group(resampled, group_column)
                fit = fit_pls(std, model, params)
            except (DataError, NumericalError):
                continue
            flips = {}
            for c in model.order:
                common = [
                    col for col in full.blocks[c] if col in fit.outer_weights[c]
                ]
                dot = sum(
                    full.outer_weights[c][col] * fit.outer_weights[c][col]
                    for col in common
                )
                flips[c] = -1.0 if dot < 0.0 else 1.0
            betas = np.array(
                [
                    fit.path_coefficients[p] * flips[p.source] * flips[p.target]
                    for p in sorted_paths
                ]
            )
            return betas, attempt
        raise NumericalError(
            f"bootstrap replicate {i}: no valid resample in {max_retries + 1} attempts"
        )

    sorted_paths = list(full.path_coefficients.keys())
    results = map_indexed(one_replicate, range(replicates), worker_count())
    samples = np.array([betas for betas, _ in results])
    retries = sum(attempt for _, attempt in results)
    if retries:
        log.info("bootstrap: %d degenerate resample retries", retries)

    lower = np.percentile(samples, 2.5, axis=0)
    upper = np.percentile(samples, 97.5, axis=0)
    return [
        PathInterval(
            path=p,
            point=full.path_coefficients[p],
            lower=float(lower[j]),
            upper=float(upper[j]),
            replicates=replicates,
            retries=retries,
        )
        for j, p in enumerate(sorted_paths)
    ]


@dataclass
class LeverEffect:
    indicator: str
    construct: str
    effect: float


@dataclass
class LeverReport:
    """Signed marginal effects on predicted recall probability.

    One entry per indicator column: the exact change in the unclamped
    predicted probability for a `delta` standardized-unit increase of that
    indicator, sorted by absolute effect.
    """

    delta: float
    group: str
    effects: list[LeverEffect]


def sensitivity_levers(
    f: FittedPls,
    base_row: EncodedMatrix,
    delta: float,
    indicators: list[str] | None = None,
) -> LeverReport:
    """Mitigation-lever analysis around a scoreable base row.

    effect = delta * outer weight * total path effect * group outcome sd,
    which equals the finite difference of predict_pls when neither
    prediction clamps.
    """
    if base_row.n_rows != 1:
        raise DataError("sensitivity_levers expects a single base row")
    group = base_row.meta_values(f.standardization.group_column)[0]
    _, outcome_sd = f.outcome_params(group)
    total = f.total_effects()

    known = {
        col: c for c in f.model.order for col in f.blocks[c] if c != f.model.outcome
    }
    if indicators is not None:
        for name in indicators:
            if name not in known:
                raise DataError(f"indicator {name!r} not in model")
    wanted = indicators if indicators is not None else list(known)

    effects = [
        LeverEffect(
            indicator=col,
            construct=known[col],
            effect=delta * f.outer_weights[known[col]][col] * total[known[col]] * outcome_sd,
        )
        for col in wanted
    ]
    effects.sort(key=lambda e: abs(e.effect), reverse=True)
    return LeverReport(delta=delta, group=group, effects=effects)


def fitted_to_dict(f: FittedPls) -> dict:
    """JSON-ready view of a fit: weights, paths, loadings, R^2,
    standardization params, and convergence diagnostics."""
    std = f.standardization
    by_group: dict[str, dict] = {}
    for (group, column), params in std.by_group.items():
        by_group.setdefault(group, {})[column] = {
            "mean": params.mean,
            "sd": params.sd,
            "source": params.source,
        }
    return {
        "outer_weights": f.outer_weights,
        "path_coefficients": {
            f"{p.source}->{p.target}": value
            for p, value in f.path_coefficients.items()
        },
        "loadings": f.loadings,
        "r_squared": f.r_squared,
        "standardization": {
            "group_column": std.group_column,
            "by_group": by_group,
            "pooled": {
                column: {"mean": params.mean, "sd": params.sd, "source": params.source}
                for column, params in std.pooled.items()
            },
            "fallbacks": [list(pair) for pair in std.fallbacks],
            "dropped_columns": std.dropped_columns,
        },
        "outcome_destandardization": {
            group: list(pair) for group, pair in f.outcome_destandardization.items()
        },
        "iterations": f.iterations,
        "converged": f.converged,
        "max_weight_delta": f.max_weight_delta,
        "model": serialize_model_spec(f.model.spec),
        "columns": f.columns,
        "blocks": f.blocks,
    }


def fitted_from_dict(raw: dict) -> FittedPls:
    from .dataset import ColumnParams
    from .model_spec import parse_model_spec, validate_model

    model = validate_model(parse_model_spec(raw["model"]))
    std_raw = raw["standardization"]
    standardization = StandardizationParams(
        group_column=std_raw["group_column"],
        by_group={
            (group, column): ColumnParams(
                entry["mean"], entry["sd"], entry["source"]
            )
            for group, columns in std_raw["by_group"].items()
            for column, entry in columns.items()
        },
        pooled={
            column: ColumnParams(entry["mean"], entry["sd"], entry["source"])
            for column, entry in std_raw["pooled"].items()
        },
        fallbacks=[tuple(pair) for pair in std_raw["fallbacks"]],
        dropped_columns=list(std_raw["dropped_columns"]),
    )
    paths = {}
    for key, value in raw["path_coefficients"].items():
        source, target = key.split("->", 1)
        paths[PathSpec(source, target)] = float(value)
    return FittedPls(
        outer_weights=raw["outer_weights"],
        construct_scores=np.zeros((0, len(model.order))),
        path_coefficients=paths,
        loadings=raw["loadings"],
        r_squared=raw["r_squared"],
        standardization=standardization,
        outcome_destandardization={
            group: tuple(pair)
            for group, pair in raw["outcome_destandardization"].items()
        },
        iterations=int(raw["iterations"]),
        converged=bool(raw["converged"]),
        max_weight_delta=float(raw["max_weight_delta"]),
        model=model,
        columns=list(raw["columns"]),
        blocks={c: list(cols) for c, cols in raw["blocks"].items()},
    )
