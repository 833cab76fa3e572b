"""Synthetic study-schema datasets with known structure, plus small-case
estimation oracles.

The generator draws indicator values, forms latent composites from
configured formative weights, adds Gaussian noise, and binarizes recall at
a per-study quantile so each study hits its configured base rate exactly
(up to rounding). Binarizing attenuates regression coefficients, so the
latent paths are inflated by the normal-theory attenuation factor before
thresholding; a pooled fit on the generated data then recovers the
configured true paths.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .dataset import EncodedMatrix, RawTable, construct_blocks, encode_indicators
from .errors import DataError
from .model_spec import ModelSpec, ValidatedModel, builtin_recall_model

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "study",
    "participant",
    "object",
    "recall",
    "object_virtuality",
    "object_congruence",
    "scene_lighting",
    "scene_congruence",
    "exposure_time_normalized",
    "task_focus",
    "task_audio",
    "user_alerted_recall",
    "ar_familiarity",
    "vr_familiarity",
]

_VIRTUALITY_LEVELS = ("physical", "virtual", "twin")
_OBJECTS_PER_PARTICIPANT = 12


@dataclass
class StudySpec:
    label: str
    n: int
    base_rate: float
    alerted: bool = False  # user_alerted_recall is constant per study


@dataclass
class SynthConfig:
    studies: list[StudySpec]
    true_paths: dict[str, float]  # construct name -> path to the outcome
    formative_weights: dict[str, float]  # encoded column name -> weight
    # Latent noise scale. Because the attenuation compensation fixes the
    # signal-to-noise ratio implied by true_paths, any positive value yields
    # the same binarized data for a given seed; 0 disables the noise term
    # entirely (recall then follows the composite ordering exactly).
    noise_sd: float = 0.8
    seed: int = 0


def default_synth_config(seed: int = 0) -> SynthConfig:
    """Paper-shaped defaults: reported path and weight magnitudes.

    These echo the published pooled-fit structure; they are generator
    inputs, not a claim to regenerate the original study results. The
    vr_familiarity weight is a small placeholder (no reported value).
    """
    return SynthConfig(
        studies=[
            StudySpec("study1", 432, 0.5, alerted=False),
            StudySpec("study2", 144, 0.5, alerted=False),
            StudySpec("study3", 144, 0.5, alerted=False),
            StudySpec("study4", 432, 0.5, alerted=True),
        ],
        true_paths={"Object": 0.103, "Scene": 0.095, "User_State": -0.471},
        formative_weights={
            "object_virtualityvirtual": -0.408,
            "object_virtualitytwin": 0.696,
            "object_congruence": 0.025,
            "scene_lighting": 0.063,
            "scene_congruence": 0.328,
            "exposure_time_normalized": 0.962,
            "user_alerted_recall": 1.457,
            "task_focus": -0.494,
            "task_audio": 0.477,
            "ar_familiarity": -0.209,
            "vr_familiarity": 0.05,
        },
        noise_sd=0.8,
        seed=seed,
    )


def synth_config_to_dict(cfg: SynthConfig) -> dict:
    return {
        "studies": [
            {
                "label": s.label,
                "n": s.n,
                "base_rate": s.base_rate,
                "alerted": s.alerted,
            }
            for s in cfg.studies
        ],
        "true_paths": cfg.true_paths,
        "formative_weights": cfg.formative_weights,
        "noise_sd": cfg.noise_sd,
        "seed": cfg.seed,
    }


def synth_config_from_dict(raw: dict) -> SynthConfig:
    try:
        return SynthConfig(
            studies=[
                StudySpec(
                    label=s["label"],
                    n=int(s["n"]),
                    base_rate=float(s["base_rate"]),
                    alerted=bool(s.get("alerted", False)),
                )
                for s in raw["studies"]
            ],
            true_paths={k: float(v) for k, v in raw["true_paths"].items()},
            formative_weights={
                k: float(v) for k, v in raw["formative_weights"].items()
            },
            noise_sd=float(raw.get("noise_sd", 0.8)),
            seed=int(raw.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"invalid synthetic config: {exc}") from exc


def load_synth_config(path) -> SynthConfig:
    with open(path, encoding="utf-8") as handle:
        return synth_config_from_dict(json.load(handle))


def _validate_config(cfg: SynthConfig) -> None:
    if not cfg.studies:
        raise DataError("config has no studies")
    for study in cfg.studies:
        if study.n < 10:
            raise DataError(f"study {study.label!r}: n must be >= 10")
        if not 0.0 < study.base_rate < 1.0:
            raise DataError(f"study {study.label!r}: base_rate must be in (0, 1)")
    if cfg.noise_sd < 0:
        raise DataError("noise_sd must be >= 0")


def _standardize_for_generation(
    values: np.ndarray, studies: np.ndarray
) -> np.ndarray:
    """Within-study z-scores; study-constant columns contribute zeros.

    Recall is binarized at a per-study quantile, which erases any
    between-study latent differences, so columns that only vary between
    studies cannot carry recoverable signal and are excluded from the
    generated composites.
    """
    out = np.zeros_like(values)
    labels = np.unique(studies)
    for j in range(values.shape[1]):
        column = values[:, j]
        for label in labels:
            rows = studies == label
            sd = float(np.std(column[rows], ddof=1))
            if sd <= 1e-12:
                continue
            out[rows, j] = (column[rows] - np.mean(column[rows])) / sd
    return out


def _attenuation_adjusted_paths(
    cfg: SynthConfig,
    composites: np.ndarray,
    order: list[str],
    studies: np.ndarray,
) -> np.ndarray:
    """Inflate latent paths so post-binarization fits recover true_paths.

    Quantile binarization of a (near) normal latent scales every regression
    coefficient by phi(q) / (sigma_v * sqrt(p (1 - p))); divide the target
    paths by the study-size-weighted mean of that factor. Solved by fixed
    point because sigma_v depends on the inflated paths.
    """
    beta = np.array([cfg.true_paths.get(name, 0.0) for name in order])
    total = len(studies)
    per_study = []
    for study in cfg.studies:
        rows = studies == study.label
        sigma = np.cov(composites[rows], rowvar=False, ddof=1)
        sigma = np.atleast_2d(sigma)
        q = norm.ppf(1.0 - study.base_rate)
        scale = float(norm.pdf(q)) / np.sqrt(study.base_rate * (1.0 - study.base_rate))
        per_study.append((rows.sum() / total, sigma, scale))

    b = beta.copy()
    for _ in range(200):
        factor = sum(
            weight * scale / np.sqrt(float(b @ sigma @ b) + cfg.noise_sd ** 2)
            for weight, sigma, scale in per_study
        )
        if factor <= 0:
            raise DataError("infeasible base rate: degenerate latent distribution")
        b_new = beta / factor
        if np.max(np.abs(b_new - b)) < 1e-12:
            b = b_new
            break
        b = b_new
    return b


def generate_synthetic(
    cfg: SynthConfig, model: ModelSpec | None = None
) -> RawTable:
    """Emit a full study-schema RawTable; deterministic under cfg.seed."""
    _validate_config(cfg)
    spec = model if model is not None else builtin_recall_model()
    rng = np.random.default_rng(cfg.seed)

    rows: list[dict[str, str]] = []
    for study in cfg.studies:
        virtuality = rng.choice(_VIRTUALITY_LEVELS, size=study.n)
        congruence = rng.integers(0, 2, study.n)
        lighting = rng.standard_normal(study.n)
        scene_congruence = rng.standard_normal(study.n)
        exposure = rng.uniform(0.0, 1.0, study.n)
        focus = rng.standard_normal(study.n)
        audio = rng.standard_normal(study.n)
        ar = rng.standard_normal(study.n)
        vr = rng.standard_normal(study.n)
        for i in range(study.n):
            rows.append(
                {
                    "study": study.label,
                    "participant": f"{study.label}_P{1 + i // _OBJECTS_PER_PARTICIPANT}",
                    "object": f"obj{1 + i % _OBJECTS_PER_PARTICIPANT:02d}",
                    "recall": "0",  # placeholder until binarization below
                    "object_virtuality": str(virtuality[i]),
                    "object_congruence": "true" if congruence[i] else "false",
                    "scene_lighting": repr(float(lighting[i])),
                    "scene_congruence": repr(float(scene_congruence[i])),
                    "exposure_time_normalized": repr(float(exposure[i])),
                    "task_focus": repr(float(focus[i])),
                    "task_audio": repr(float(audio[i])),
                    "user_alerted_recall": "true" if study.alerted else "false",
                    "ar_familiarity": repr(float(ar[i])),
                    "vr_familiarity": repr(float(vr[i])),
                }
            )

    raw = RawTable(rows=rows, columns=list(CSV_COLUMNS))
    encoded = encode_indicators(raw, spec)
    studies = np.array([meta[0] for meta in encoded.row_meta])

    blocks = construct_blocks(spec, encoded.column_names)
    outcome = next(
        c.name
        for c in spec.constructs
        if any(ind.kind == "binary-outcome" for ind in c.indicators)
    )
    order = [c.name for c in spec.constructs if c.name != outcome]

    col_index = {name: j for j, name in enumerate(encoded.column_names)}
    standardized = _standardize_for_generation(encoded.values, studies)

    composites = np.empty((len(rows), len(order)))
    for idx, name in enumerate(order):
        weights = np.array(
            [cfg.formative_weights.get(col, 0.0) for col in blocks[name]]
        )
        z = standardized[:, [col_index[col] for col in blocks[name]]] @ weights
        sd = float(np.std(z, ddof=1))
        if sd <= 1e-12:
            raise DataError(
                f"construct {name!r} has a degenerate composite; check weights"
            )
        composites[:, idx] = z / sd

    if cfg.noise_sd > 0:
        adjusted = _attenuation_adjusted_paths(cfg, composites, order, studies)
        noise = rng.standard_normal(len(rows)) * cfg.noise_sd
    else:
        # Noiseless: recall is determined by the composite ordering alone,
        # so the attenuation fixed point (which solves for a signal-to-noise
        # ratio) does not apply.
        adjusted = np.array([cfg.true_paths.get(name, 0.0) for name in order])
        noise = 0.0
    latent = composites @ adjusted + noise

    for study in cfg.studies:
        rows_s = np.nonzero(studies == study.label)[0]
        k = int(round(study.n * study.base_rate))
        k = min(max(k, 0), study.n)
        ranked = rows_s[np.argsort(-latent[rows_s], kind="stable")]
        for pos, row_idx in enumerate(ranked):
            raw.rows[row_idx]["recall"] = "1" if pos < k else "0"

    return raw


def aligned_paths(fitted, cfg: SynthConfig) -> dict[str, float]:
    """Fitted outcome paths with signs aligned to the generating weights.

    The estimator's composite sign convention (sum of loadings >= 0) is
    arbitrary relative to the generator's weights, so a recovered composite
    may be the negation of the generated one. Flip a construct's path when
    its fitted outer weights point against the configured weights.
    """
    out = {}
    for path, beta in fitted.path_coefficients.items():
        dot = sum(
            w * cfg.formative_weights.get(col, 0.0)
            for col, w in fitted.outer_weights[path.source].items()
        )
        out[path.source] = -beta if dot < 0 else beta
    return out


@dataclass
class OracleResult:
    coefficients: list[float]
    method: str = field(default="pooled-correlation normal equations")


def small_case_oracle(m: EncodedMatrix, model: ValidatedModel) -> OracleResult:
    """Closed-form check for the single-indicator-per-construct regime.

    Returns the multiple least-squares coefficients of the standardized
    outcome on the standardized predictors, solved directly from the
    correlation matrix (a route independent of the iterative estimator).
    """
    blocks = construct_blocks(model.spec, m.column_names)
    for name, cols in blocks.items():
        if len(cols) != 1:
            raise DataError(
                f"oracle inapplicable: construct {name!r} has {len(cols)} indicators"
            )

    predictors = model.predecessors[model.outcome]
    columns = [blocks[p][0] for p in predictors] + [blocks[model.outcome][0]]
    data = np.column_stack([m.column(c) for c in columns])
    data = (data - data.mean(axis=0)) / data.std(axis=0, ddof=1)
    corr = (data.T @ data) / (data.shape[0] - 1)
    coef = np.linalg.solve(corr[:-1, :-1], corr[:-1, -1])
    return OracleResult(coefficients=coef.tolist())
