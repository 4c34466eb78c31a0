"""Subpopulation-aware label aggregation.

Thin wrapper over the compiled ``_nutmeg`` extension. Array results are
numpy arrays; identifiers and labels are strings.
"""

from ._nutmeg import (
    CompetenceTable,
    Dataset,
    DawidSkeneFit,
    FitConfig,
    FitResult,
    ImputationPolicy,
    NumericalError,
    PosteriorTable,
    SimConfig,
    SyntheticWorld,
    ValidationError,
    aggregate,
    competence_correlation,
    dawid_skene,
    divisiveness_estimate,
    evaluate,
    fit,
    generate,
    impute,
    jsd,
    mace,
    majority_vote,
    pearson,
    subpop_accuracy,
)

__all__ = [
    "CompetenceTable",
    "Dataset",
    "DawidSkeneFit",
    "FitConfig",
    "FitResult",
    "ImputationPolicy",
    "NumericalError",
    "PosteriorTable",
    "SimConfig",
    "SyntheticWorld",
    "ValidationError",
    "aggregate",
    "competence_correlation",
    "dawid_skene",
    "divisiveness_estimate",
    "evaluate",
    "fit",
    "generate",
    "impute",
    "jsd",
    "mace",
    "majority_vote",
    "pearson",
    "subpop_accuracy",
]

__version__ = "0.1.0"
