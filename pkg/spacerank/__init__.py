"""spacerank: budget-aware scoring, ranking and pruning of search spaces."""

__version__ = "1.0.0"
__author__ = "spacerank Contributors"
__license__ = "MIT"

from .core import (
    Budget,
    Dataset,
    Observation,
    OutOfDomainError,
    ParamDomain,
    Scale,
    SearchSpace,
    SpaceDefinitionError,
    SpaceRankError,
)
from .config import FitConfig, GenerationSettings, ScoreConfig
from .gp import (
    DegenerateCovarianceError,
    GpModel,
    IllConditionedKernelError,
    InsufficientDataError,
    fit,
)
from .scoring import (
    NoSupportError,
    ObjectiveEvaluationError,
    ScoreEstimate,
    Variant,
    empirical_score,
    predicted_score,
    tabular_empirical_score,
)
from .spacegen import (
    ReductionRate,
    centered_subspace,
    propose_search_spaces,
    random_subspace,
)
from .workflows import (
    one_shot_prune,
    rank_preservation_probability,
    rank_spaces,
    tune_or_fix,
)
from .file_utils import InputFormatError
from .cli import main

__all__ = [
    "Budget",
    "Dataset",
    "Observation",
    "OutOfDomainError",
    "ParamDomain",
    "Scale",
    "SearchSpace",
    "SpaceDefinitionError",
    "SpaceRankError",
    "FitConfig",
    "GenerationSettings",
    "ScoreConfig",
    "DegenerateCovarianceError",
    "GpModel",
    "IllConditionedKernelError",
    "InsufficientDataError",
    "fit",
    "NoSupportError",
    "ObjectiveEvaluationError",
    "ScoreEstimate",
    "Variant",
    "empirical_score",
    "predicted_score",
    "tabular_empirical_score",
    "ReductionRate",
    "centered_subspace",
    "propose_search_spaces",
    "random_subspace",
    "one_shot_prune",
    "rank_preservation_probability",
    "rank_spaces",
    "tune_or_fix",
    "InputFormatError",
    "main",
]
