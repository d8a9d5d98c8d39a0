"""Predicted and empirical search-space scores.

A score is the expected utility of spending a budget of b uniform draws in a
space: b-EI uses max(0, y+ - min(y)) and b-PI uses 1[min(y) < y+]. Predicted
scores draw y from the joint GP posterior over each batch; empirical scores
evaluate the objective (or a table of past evaluations) instead.

Budget sweeps are coupled: every budget reuses the prefix of the largest
budget's batches and posterior draws, so per-batch utilities are exactly
non-decreasing in b.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import ScoreConfig
from .constants import (
    MC_CHUNK_SIZE,
    VARIANT_MEAN_BEI,
    VARIANT_MEAN_BPI,
    VARIANT_MEDIAN_BEI,
    VARIANT_MEDIAN_BPI,
)
from .core import (
    Budget,
    Dataset,
    SearchSpace,
    SpaceRankError,
    as_budget,
    draw_uniform,
    make_rng,
    transform,
)
from .gp import GpModel, posterior_moments, stacked_posterior_cholesky

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], Any]


class NoSupportError(SpaceRankError, ValueError):
    """Raised when a table has no rows inside the scored space."""

    pass


class ObjectiveEvaluationError(SpaceRankError, RuntimeError):
    """Raised when the objective fails; carries the failing point."""

    def __init__(self, message: str, x: Optional[np.ndarray] = None):
        super().__init__(message)
        self.x = x


class Variant(str, Enum):
    MEAN_BEI = VARIANT_MEAN_BEI
    MEDIAN_BEI = VARIANT_MEDIAN_BEI
    MEAN_BPI = VARIANT_MEAN_BPI
    MEDIAN_BPI = VARIANT_MEDIAN_BPI

    @property
    def is_median(self) -> bool:
        return self in (Variant.MEDIAN_BEI, Variant.MEDIAN_BPI)

    @property
    def is_pi(self) -> bool:
        return self in (Variant.MEAN_BPI, Variant.MEDIAN_BPI)


@dataclass(frozen=True)
class ScoreEstimate:
    """A score value with its Monte Carlo standard error."""

    value: float
    std_error: float
    config: ScoreConfig
    budget: Budget
    incumbent: float
    space_id: str = ""

    def with_space_id(self, space_id: str) -> "ScoreEstimate":
        return ScoreEstimate(
            self.value,
            self.std_error,
            self.config,
            self.budget,
            self.incumbent,
            space_id,
        )

    def to_row(self) -> Dict[str, Any]:
        return {
            "space_id": self.space_id,
            "budget": self.budget.b,
            "variant": self.config.variant,
            "value": self.value,
            "std_error": self.std_error,
            "incumbent": self.incumbent,
            "n_x_batches": self.config.n_x_batches,
            "n_posterior_samples": self.config.n_posterior_samples,
            "seed": self.config.seed,
        }


SCORE_COLUMNS = [
    "space_id",
    "budget",
    "variant",
    "value",
    "std_error",
    "incumbent",
    "n_x_batches",
    "n_posterior_samples",
    "seed",
]


def _budget_array(budgets: Sequence[Union[Budget, int]]) -> np.ndarray:
    values = [as_budget(b).b for b in budgets]
    if not values:
        raise ValueError("At least one budget is required")
    return np.array(values, dtype=int)


def _utilities(mins: np.ndarray, incumbent: float, is_pi: bool) -> np.ndarray:
    if is_pi:
        return (mins < incumbent).astype(float)
    return np.maximum(0.0, incumbent - mins)


def _summarize(
    utilities: np.ndarray,
    budgets: np.ndarray,
    config: ScoreConfig,
    incumbent: float,
    scale: float = 1.0,
) -> List[ScoreEstimate]:
    """Reduce per-batch utilities of shape (n_batches, n_budgets)."""
    variant = Variant(config.variant)
    if not variant.is_pi:
        utilities = utilities * scale
    n = utilities.shape[0]

    if variant.is_median:
        values = np.median(utilities, axis=0)
        rng = make_rng(config.seed, "bootstrap")
        idx = rng.integers(0, n, size=(config.n_bootstrap, n))
        resampled = np.median(utilities[idx], axis=1)
        errors = (
            np.std(resampled, axis=0, ddof=1)
            if config.n_bootstrap > 1
            else np.zeros(len(budgets))
        )
    else:
        values = np.mean(utilities, axis=0)
        errors = (
            np.std(utilities, axis=0, ddof=1) / math.sqrt(n)
            if n > 1
            else np.zeros(len(budgets))
        )

    return [
        ScoreEstimate(
            value=float(v),
            std_error=float(e),
            config=config,
            budget=Budget(int(b)),
            incumbent=float(incumbent),
        )
        for v, e, b in zip(values, errors, budgets)
    ]


def _check_compatible(model: GpModel, space: SearchSpace) -> None:
    if space.names != model.space.names or any(
        a.scale is not b.scale for a, b in zip(space.dims, model.space.dims)
    ):
        raise ValueError(
            f"Space dimensions {space.names} do not match the model's "
            f"{model.space.names}"
        )
    if not space.is_subset_of(model.space):
        logger.warning(
            f"Scored space '{space.name}' is not contained in the model's training "
            f"space; the GP will extrapolate"
        )


def _model_unit_coordinates(model: GpModel, x: np.ndarray) -> np.ndarray:
    """Unit-cube coordinates relative to the model space, without clipping."""
    base = model.space
    length = base.t_length
    safe = np.where(length > 0, length, 1.0)
    return np.where(length > 0, (transform(base, x) - base.t_lower) / safe, 0.0)


def _chunk_bounds(n_batches: int) -> List[Tuple[int, int]]:
    return [
        (start, min(start + MC_CHUNK_SIZE, n_batches))
        for start in range(0, n_batches, MC_CHUNK_SIZE)
    ]


def _predicted_chunk(
    model: GpModel,
    space: SearchSpace,
    budgets: np.ndarray,
    incumbent_std: float,
    config: ScoreConfig,
    chunk: int,
    start: int,
    stop: int,
) -> np.ndarray:
    """Per-batch expected utilities for batches [start, stop)."""
    rng = make_rng(config.seed, "predicted", chunk)
    b_max = int(budgets.max())
    x = draw_uniform(space, rng, (stop - start, b_max))
    unit = _model_unit_coordinates(model, x)
    mean, cov = posterior_moments(model, unit, config.include_noise)
    chol = stacked_posterior_cholesky(cov, model.prior_var, first_batch=start)
    z = rng.standard_normal((stop - start, b_max, config.n_posterior_samples))
    samples = mean[..., None] + chol @ z
    running_min = np.minimum.accumulate(samples, axis=1)
    mins = running_min[:, budgets - 1, :]
    utilities = _utilities(mins, incumbent_std, Variant(config.variant).is_pi)
    return utilities.mean(axis=-1)


def predicted_score_curve(
    model: GpModel,
    space: SearchSpace,
    budgets: Sequence[Union[Budget, int]],
    incumbent: float,
    config: Optional[ScoreConfig] = None,
) -> List[ScoreEstimate]:
    """Coupled predicted scores for several budgets, one per input budget.

    Raises:
        ValueError: If the incumbent is not finite or the space does not match.
        DegenerateCovarianceError: If a batch covariance cannot be factorized.
    """
    config = config or ScoreConfig()
    config.validate()
    if not math.isfinite(incumbent):
        raise ValueError(f"Incumbent must be finite, got {incumbent}")
    _check_compatible(model, space)
    budget_array = _budget_array(budgets)
    incumbent_std = float(model.standardize(incumbent))

    chunks = _chunk_bounds(config.n_x_batches)
    utilities = np.empty((config.n_x_batches, budget_array.size))

    def run(item: Tuple[int, Tuple[int, int]]) -> None:
        chunk, (start, stop) = item
        utilities[start:stop] = _predicted_chunk(
            model, space, budget_array, incumbent_std, config, chunk, start, stop
        )

    if config.max_workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=config.max_workers) as executor:
            list(executor.map(run, enumerate(chunks)))
    else:
        for item in enumerate(chunks):
            run(item)

    logger.debug(
        f"Scored '{space.name}' at budgets {budget_array.tolist()} "
        f"with {config.n_x_batches} batches"
    )
    return _summarize(utilities, budget_array, config, incumbent, scale=model.y_std)


def predicted_score(
    model: GpModel,
    space: SearchSpace,
    budget: Union[Budget, int],
    incumbent: float,
    config: Optional[ScoreConfig] = None,
) -> ScoreEstimate:
    """Monte Carlo estimate of the expected batch utility of a space under the GP."""
    return predicted_score_curve(model, space, [budget], incumbent, config)[0]


def evaluate_objective(objective: Objective, x: np.ndarray) -> np.ndarray:
    """Evaluate points of shape (n, d), vectorized when the objective allows it.

    Raises:
        ObjectiveEvaluationError: If an evaluation raises or is not finite.
    """
    x = np.atleast_2d(x)
    if getattr(objective, "vectorized", False):
        try:
            values = np.asarray(objective(x), dtype=float).reshape(len(x))
        except SpaceRankError:
            raise
        except Exception as e:
            raise ObjectiveEvaluationError(f"Objective failed on a batch: {e}", x=x)
        bad = ~np.isfinite(values)
        if bad.any():
            point = x[np.argmax(bad)]
            raise ObjectiveEvaluationError(
                f"Objective returned a non-finite value at {point.tolist()}", x=point
            )
        return values

    values = np.empty(len(x))
    for i, point in enumerate(x):
        try:
            values[i] = float(objective(point))
        except Exception as e:
            raise ObjectiveEvaluationError(
                f"Objective failed at {point.tolist()}: {e}", x=point
            )
        if not math.isfinite(values[i]):
            raise ObjectiveEvaluationError(
                f"Objective returned a non-finite value at {point.tolist()}", x=point
            )
    return values


def _empirical_curve(
    draw: Callable[[np.random.Generator, int, int], np.ndarray],
    budgets: Sequence[Union[Budget, int]],
    incumbent: float,
    variant: Union[Variant, str],
    n_trials: int,
    seed: int,
) -> List[ScoreEstimate]:
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    if not math.isfinite(incumbent):
        raise ValueError(f"Incumbent must be finite, got {incumbent}")
    variant = Variant(variant)
    budget_array = _budget_array(budgets)
    config = ScoreConfig(
        variant=variant.value, n_x_batches=n_trials, n_posterior_samples=1, seed=seed
    )
    config.validate()

    values = draw(make_rng(seed, "empirical"), n_trials, int(budget_array.max()))
    mins = np.minimum.accumulate(values, axis=1)[:, budget_array - 1]
    utilities = _utilities(mins, incumbent, variant.is_pi)
    return _summarize(utilities, budget_array, config, incumbent)


def empirical_score_curve(
    objective: Objective,
    space: SearchSpace,
    budgets: Sequence[Union[Budget, int]],
    incumbent: float,
    variant: Union[Variant, str] = Variant.MEAN_BEI,
    n_trials: int = 1000,
    seed: int = 0,
) -> List[ScoreEstimate]:
    """Coupled empirical scores from fresh uniform batches of true evaluations."""

    def draw(rng: np.random.Generator, n: int, b_max: int) -> np.ndarray:
        x = draw_uniform(space, rng, (n, b_max))
        return evaluate_objective(objective, x.reshape(n * b_max, space.d)).reshape(
            n, b_max
        )

    return _empirical_curve(draw, budgets, incumbent, variant, n_trials, seed)


def empirical_score(
    objective: Objective,
    space: SearchSpace,
    budget: Union[Budget, int],
    incumbent: float,
    variant: Union[Variant, str] = Variant.MEAN_BEI,
    n_trials: int = 1000,
    seed: int = 0,
) -> ScoreEstimate:
    """Expected batch utility of a space under the true objective.

    Raises:
        ObjectiveEvaluationError: If the objective fails; carries the point.
    """
    return empirical_score_curve(
        objective, space, [budget], incumbent, variant, n_trials, seed
    )[0]


def tabular_empirical_score_curve(
    table: Dataset,
    space: SearchSpace,
    budgets: Sequence[Union[Budget, int]],
    incumbent: float,
    variant: Union[Variant, str] = Variant.MEAN_BEI,
    n_trials: int = 1000,
    seed: int = 0,
) -> List[ScoreEstimate]:
    """Empirical scores from table rows inside space, drawn with replacement.

    Raises:
        NoSupportError: If no table row lies inside space.
    """
    y = np.array([o.y for o in table.obs if space.contains(o.x)], dtype=float)
    if y.size == 0:
        raise NoSupportError(
            f"None of the {table.n} table rows lie inside space '{space.name}'"
        )

    def draw(rng: np.random.Generator, n: int, b_max: int) -> np.ndarray:
        return y[rng.integers(0, y.size, size=(n, b_max))]

    return _empirical_curve(draw, budgets, incumbent, variant, n_trials, seed)


def tabular_empirical_score(
    table: Dataset,
    space: SearchSpace,
    budget: Union[Budget, int],
    incumbent: float,
    variant: Union[Variant, str] = Variant.MEAN_BEI,
    n_trials: int = 1000,
    seed: int = 0,
) -> ScoreEstimate:
    """Offline empirical score over pre-collected evaluations."""
    return tabular_empirical_score_curve(
        table, space, [budget], incumbent, variant, n_trials, seed
    )[0]
