"""Permutation Shapley variable importance with minimum-contribution and
p-value based conditional-independence tests for feature selection."""

__version__ = "0.1.0"

from .core import (
    DataError,
    Dataset,
    PermutationPlan,
    RngStream,
    all_permutations,
    order_statistics,
    read_csv,
    sample_permutations,
)
from .learners import FittedModel, LearnerError, LearnerSpec, dropout_value, fit, value
from .seltest import (
    FeatureTestRecord,
    holm_adjust,
    max_p,
    minshap_threshold,
    pcht_pvalue,
    perm_pvalues,
    recommend_k,
    run_all_tests,
    screen_u,
)
from .shapley import (
    ShapleyStats,
    VIMatrix,
    build_vi_matrix,
    evaluate_permutation,
    reduce_stats,
)
from .simbench import (
    BenchResult,
    GroundTruth,
    Metrics,
    SimConfig,
    confusion_metrics,
    generate,
    jaccard_stability,
    run_experiment,
)

__all__ = [
    "BenchResult",
    "DataError",
    "Dataset",
    "FeatureTestRecord",
    "FittedModel",
    "GroundTruth",
    "LearnerError",
    "LearnerSpec",
    "Metrics",
    "PermutationPlan",
    "RngStream",
    "ShapleyStats",
    "SimConfig",
    "VIMatrix",
    "all_permutations",
    "build_vi_matrix",
    "confusion_metrics",
    "dropout_value",
    "evaluate_permutation",
    "fit",
    "generate",
    "holm_adjust",
    "jaccard_stability",
    "max_p",
    "minshap_threshold",
    "order_statistics",
    "pcht_pvalue",
    "perm_pvalues",
    "read_csv",
    "recommend_k",
    "reduce_stats",
    "run_all_tests",
    "run_experiment",
    "sample_permutations",
    "screen_u",
    "value",
]
