"""pathlens: PLS path modeling for binary recall prediction, with random
forest and MLP baselines benchmarked on shared cross-validation folds."""

__version__ = "0.1.0"

from .baselines import BACKEND, ForestConfig, MlpConfig
from .dataset import (
    EncodedMatrix,
    RawTable,
    StandardizationParams,
    apply_standardization,
    encode_indicators,
    ingest_csv,
    standardize_within_group,
)
from .errors import DataError, ModelSpecError, NonConvergenceError, NumericalError
from .evaluation import (
    BenchmarkTable,
    FoldAssignment,
    MetricsReport,
    RangeReport,
    benchmark_suite,
    classification_metrics,
    cross_validate,
    make_folds,
    recall_aggregates,
)
from .model_spec import (
    ModelSpec,
    ValidatedModel,
    builtin_recall_model,
    parse_model_spec,
    serialize_model_spec,
    validate_model,
)
from .pls import (
    FittedPls,
    LeverReport,
    PathInterval,
    bootstrap_paths,
    fit_pls,
    predict_pls,
    sensitivity_levers,
)
from .predictions import PredictionSet
from .synth import SynthConfig, default_synth_config, generate_synthetic, small_case_oracle
