"""Search-space workflows: ranking, one-shot pruning, tune-vs-fix and
rank-preservation checks."""

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from .bench import StudyLog, random_search
from .config import FitConfig, GenerationSettings, ScoreConfig
from .constants import (
    DEFAULT_N_PAIRS,
    DEFAULT_QUANTILE_BINS,
    RANK_MODE_MAX,
    RANK_MODE_RANDOM,
    TUNE_LABEL,
    VALID_RANK_MODES,
)
from .core import (
    Budget,
    Dataset,
    Observation,
    SearchSpace,
    as_budget,
    derive_seed,
    make_rng,
)
from .gp import GpModel, InsufficientDataError, fit
from .scoring import (
    NoSupportError,
    Objective,
    ScoreEstimate,
    predicted_score,
    predicted_score_curve,
)
from .spacegen import propose_search_spaces

logger = logging.getLogger(__name__)

Sampler = Callable[[Objective, SearchSpace, Union[Budget, int], int], StudyLog]


def space_ids(spaces: Sequence[SearchSpace]) -> List[str]:
    """Stable identifiers: the space name, suffixed with its position if needed."""
    names = [space.name or f"space-{i}" for i, space in enumerate(spaces)]
    return [
        name if names.count(name) == 1 else f"{name}@{i}"
        for i, name in enumerate(names)
    ]


@dataclass(frozen=True)
class RankingResult:
    """Spaces sorted by descending score; ties broken by id."""

    entries: Tuple[Tuple[str, ScoreEstimate], ...]
    budget: Budget

    @property
    def order(self) -> List[str]:
        return [space_id for space_id, _ in self.entries]

    def score_of(self, space_id: str) -> ScoreEstimate:
        for candidate, estimate in self.entries:
            if candidate == space_id:
                return estimate
        raise KeyError(f"No space '{space_id}' in ranking")

    def to_rows(self) -> List[Dict[str, Any]]:
        return [
            {"rank": rank + 1, **estimate.to_row()}
            for rank, (_, estimate) in enumerate(self.entries)
        ]


def _ranking(
    ids: Sequence[str], estimates: Sequence[ScoreEstimate], budget: Budget
) -> RankingResult:
    pairs = [(i, e.with_space_id(i)) for i, e in zip(ids, estimates)]
    pairs.sort(key=lambda pair: (-pair[1].value, pair[0]))
    return RankingResult(entries=tuple(pairs), budget=budget)


def score_spaces(
    model: GpModel,
    spaces: Sequence[SearchSpace],
    budgets: Sequence[Union[Budget, int]],
    incumbent: float,
    config: ScoreConfig,
    verbose: bool = False,
) -> List[List[ScoreEstimate]]:
    """Coupled score curves for each space, all under the same seed."""
    curves = []
    iterator = tqdm(spaces, desc="Scoring spaces", unit="space") if verbose else spaces
    for space in iterator:
        curves.append(predicted_score_curve(model, space, budgets, incumbent, config))
    return curves


def rank_spaces_curve(
    data: Dataset,
    spaces: Sequence[SearchSpace],
    budgets: Sequence[Union[Budget, int]],
    config: Optional[ScoreConfig] = None,
    fit_config: Optional[FitConfig] = None,
    verbose: bool = False,
) -> List[RankingResult]:
    """Fit one model on data and rank spaces at each budget.

    Raises:
        ValueError: If spaces is empty.
        InsufficientDataError: If data has fewer than two observations.
    """
    if not spaces:
        raise ValueError("At least one search space is required for ranking")
    config = config or ScoreConfig()
    model = fit(data, seed=config.seed, config=fit_config)
    ids = space_ids(spaces)
    curves = score_spaces(model, spaces, budgets, data.incumbent, config, verbose)
    results = [
        _ranking(ids, [curve[k] for curve in curves], as_budget(budget))
        for k, budget in enumerate(budgets)
    ]
    for result in results:
        logger.info(f"Budget {result.budget.b}: ranking {result.order}")
    return results


def rank_spaces(
    data: Dataset,
    spaces: Sequence[SearchSpace],
    budget: Union[Budget, int],
    config: Optional[ScoreConfig] = None,
    fit_config: Optional[FitConfig] = None,
) -> RankingResult:
    """Rank candidate spaces by predicted score at one budget."""
    return rank_spaces_curve(data, spaces, [budget], config, fit_config)[0]


class TableSampler:
    """Random search over pre-collected evaluations.

    Rows inside the requested space are drawn without replacement while
    enough remain.
    """

    def __init__(self, table: Dataset):
        self.table = table

    def __call__(
        self,
        objective: Optional[Objective],
        space: SearchSpace,
        n: Union[Budget, int],
        seed: int,
    ) -> StudyLog:
        count = as_budget(n).b
        rows = [o for o in self.table.obs if space.contains(o.x)]
        if not rows:
            raise NoSupportError(
                f"None of the {self.table.n} table rows lie inside '{space.name}'"
            )
        rng = make_rng(seed, "table-sampler")
        idx = rng.choice(len(rows), size=count, replace=count > len(rows))
        if count > len(rows):
            logger.warning(
                f"Requested {count} rows but only {len(rows)} lie inside "
                f"'{space.name}'; sampling with replacement"
            )
        return StudyLog(tuple(rows[i] for i in idx))


@dataclass(frozen=True)
class PruneResult:
    """Outcome of one round of score-guided pruning."""

    chosen_space: SearchSpace
    all_scores: Tuple[Tuple[SearchSpace, ScoreEstimate], ...]
    phase1: Dataset
    phase2: Dataset
    best: Observation
    fell_back: bool = False

    @property
    def log(self) -> StudyLog:
        return StudyLog(self.phase1.obs).then(StudyLog(self.phase2.obs))

    def to_dict(self) -> Dict[str, Any]:
        chosen = next(
            (e for s, e in self.all_scores if s is self.chosen_space), None
        )
        return {
            "chosen_space": self.chosen_space.to_dict(),
            "chosen_score": chosen.to_row() if chosen else None,
            "fell_back": self.fell_back,
            "n_candidates": len(self.all_scores),
            "best": {"x": list(self.best.x), "y": self.best.y},
            "phase1_best": self.phase1.incumbent,
            "phase2_best": self.phase2.incumbent,
            "best_curve": self.log.best_curve.tolist(),
        }


def one_shot_prune(
    objective: Optional[Objective],
    base: SearchSpace,
    b1: Union[Budget, int],
    b2: Union[Budget, int],
    generation: Optional[GenerationSettings] = None,
    config: Optional[ScoreConfig] = None,
    seed: int = 0,
    fit_config: Optional[FitConfig] = None,
    sampler: Optional[Sampler] = None,
    verbose: bool = False,
) -> PruneResult:
    """Spend b1 evaluations on base, pick the best-scoring sub-space, spend b2 there.

    Raises:
        InsufficientDataError: If b1 < 2.
        ObjectiveEvaluationError: If the objective fails.
    """
    b1, b2 = as_budget(b1), as_budget(b2)
    if b1.b < 2:
        raise InsufficientDataError(f"b1 must be >= 2 to fit a model, got {b1.b}")
    generation = generation or GenerationSettings()
    generation.validate()
    config = config or ScoreConfig()
    sampler = sampler or random_search

    phase1 = sampler(objective, base, b1, derive_seed(seed, "phase1")).to_dataset(base)
    model = fit(phase1, seed=derive_seed(seed, "fit"), config=fit_config)

    candidates = propose_search_spaces(
        base, generation.rates, generation.per_rate, derive_seed(seed, "propose")
    )
    if generation.include_base:
        candidates = [base.with_name("base")] + candidates

    score_config = config.with_seed(derive_seed(seed, "score", config.seed))
    iterator = (
        tqdm(candidates, desc="Scoring candidates", unit="space")
        if verbose
        else candidates
    )
    scores = [
        predicted_score(model, space, b2, phase1.incumbent, score_config)
        for space in iterator
    ]

    values = np.array([s.value for s in scores])
    best_index = int(np.argmax(values))
    fell_back = not values[best_index] > 0
    if fell_back:
        logger.warning("Every candidate space scored zero; keeping the base space")
        chosen = base
    else:
        chosen = candidates[best_index]
        logger.info(
            f"Chose space '{chosen.name}' with score {values[best_index]:.6g} "
            f"out of {len(candidates)} candidates"
        )

    phase2_log = sampler(objective, chosen, b2, derive_seed(seed, "phase2"))
    phase2 = phase2_log.to_dataset(base)
    combined = phase1.extend(phase2.obs)
    return PruneResult(
        chosen_space=chosen,
        all_scores=tuple(zip(candidates, scores)),
        phase1=phase1,
        phase2=phase2,
        best=combined.best,
        fell_back=fell_back,
    )


@dataclass(frozen=True)
class TuneOrFixResult:
    """Scores of the tuned space and each fixed-value variant."""

    scored: Tuple[Tuple[str, ScoreEstimate], ...]
    recommendation: str
    budget: Budget

    def to_dict(self) -> Dict[str, Any]:
        return {
            "budget": self.budget.b,
            "recommendation": self.recommendation,
            "scores": [estimate.to_row() for _, estimate in self.scored],
        }


def tune_or_fix_curve(
    data: Dataset,
    base: SearchSpace,
    dim: str,
    fixed_values: Sequence[float],
    budgets: Sequence[Union[Budget, int]],
    config: Optional[ScoreConfig] = None,
    fit_config: Optional[FitConfig] = None,
) -> List[TuneOrFixResult]:
    """Compare tuning a dimension against pinning it, at each budget.

    Raises:
        ValueError: If dim is not a dimension of base.
        OutOfDomainError: If a fixed value lies outside the dimension.
    """
    try:
        base.index(dim)
    except KeyError as e:
        raise ValueError(str(e).strip("'\""))
    config = config or ScoreConfig()

    spaces = [base.with_name(TUNE_LABEL)]
    spaces += [base.fix(dim, value) for value in fixed_values]
    labels = [space.name for space in spaces]

    model = fit(data, seed=config.seed, config=fit_config)
    curves = score_spaces(model, spaces, budgets, data.incumbent, config)

    results = []
    for k, budget in enumerate(budgets):
        scored = tuple(
            (label, curve[k].with_space_id(label))
            for label, curve in zip(labels, curves)
        )
        best = max(range(len(scored)), key=lambda i: (scored[i][1].value, -i))
        results.append(
            TuneOrFixResult(
                scored, recommendation=labels[best], budget=as_budget(budget)
            )
        )
        logger.info(f"Budget {as_budget(budget).b}: recommend '{labels[best]}'")
    return results


def tune_or_fix(
    data: Dataset,
    base: SearchSpace,
    dim: str,
    fixed_values: Sequence[float],
    budget: Union[Budget, int],
    config: Optional[ScoreConfig] = None,
    fit_config: Optional[FitConfig] = None,
) -> TuneOrFixResult:
    """Decide whether to tune dim over its range or fix it to one of the values."""
    return tune_or_fix_curve(
        data, base, dim, fixed_values, [budget], config, fit_config
    )[0]


@dataclass(frozen=True)
class AgreementBin:
    lower_quantile: float
    upper_quantile: float
    lower_distance: float
    upper_distance: float
    accuracy: float
    std_error: float
    n_pairs: int


@dataclass(frozen=True)
class RankAgreement:
    """Per-bin frequency with which predicted order matches empirical order."""

    bins: Tuple[AgreementBin, ...]
    mode: str

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([b.accuracy for b in self.bins])


def rank_agreement(
    predicted: Sequence[float],
    empirical: Sequence[float],
    n_pairs: int = DEFAULT_N_PAIRS,
    quantile_bins: int = DEFAULT_QUANTILE_BINS,
    mode: str = RANK_MODE_RANDOM,
    seed: int = 0,
) -> RankAgreement:
    """Sample space pairs and bin rank agreement by empirical score distance.

    A pair agrees when the space with the higher empirical score also has
    the higher predicted score. Pairs with equal empirical scores are
    skipped. In ``max`` mode one member of every pair is the max-scoring
    (predicted) space.

    Raises:
        ValueError: If fewer than two spaces are given or arguments are invalid.
    """
    predicted = np.asarray(predicted, dtype=float)
    empirical = np.asarray(empirical, dtype=float)
    if predicted.shape != empirical.shape or predicted.ndim != 1:
        raise ValueError("Predicted and empirical scores must be equal-length vectors")
    size = predicted.size
    if size < 2:
        raise ValueError(f"Rank agreement needs at least 2 spaces, got {size}")
    if mode not in VALID_RANK_MODES:
        raise ValueError(
            f"Invalid mode '{mode}'. Must be one of: {', '.join(VALID_RANK_MODES)}"
        )
    if n_pairs < 1 or quantile_bins < 1:
        raise ValueError("n_pairs and quantile_bins must be >= 1")

    rng = make_rng(seed, "rank-pairs")
    if mode == RANK_MODE_MAX:
        j = np.full(n_pairs, int(np.argmax(predicted)))
        i = rng.integers(0, size - 1, size=n_pairs)
        i = i + (i >= j)
    else:
        i = rng.integers(0, size, size=n_pairs)
        j = (i + rng.integers(1, size, size=n_pairs)) % size

    emp_diff = empirical[i] - empirical[j]
    keep = emp_diff != 0
    pred_diff = (predicted[i] - predicted[j])[keep]
    emp_diff = emp_diff[keep]
    agree = np.sign(pred_diff) == np.sign(emp_diff)
    distance = np.abs(emp_diff)

    quantiles = np.linspace(0.0, 1.0, quantile_bins + 1)
    bins = []
    if distance.size:
        edges = np.quantile(distance, quantiles)
        which = np.clip(
            np.searchsorted(edges, distance, side="right") - 1, 0, quantile_bins - 1
        )
    for k in range(quantile_bins):
        members = agree[which == k] if distance.size else agree
        n = int(members.size)
        accuracy = float(members.mean()) if n else float("nan")
        std_error = math.sqrt(accuracy * (1 - accuracy) / n) if n else float("nan")
        bins.append(
            AgreementBin(
                lower_quantile=float(quantiles[k]),
                upper_quantile=float(quantiles[k + 1]),
                lower_distance=float(edges[k]) if distance.size else float("nan"),
                upper_distance=float(edges[k + 1]) if distance.size else float("nan"),
                accuracy=accuracy,
                std_error=std_error,
                n_pairs=n,
            )
        )
    return RankAgreement(bins=tuple(bins), mode=mode)


@dataclass(frozen=True)
class RankPreservationResult:
    """Rank agreement per data draw, with per-bin aggregates across draws."""

    runs: Tuple[RankAgreement, ...]

    @property
    def mean_accuracy(self) -> np.ndarray:
        return np.nanmean(np.stack([run.accuracies for run in self.runs]), axis=0)

    @property
    def std_error(self) -> np.ndarray:
        stacked = np.stack([run.accuracies for run in self.runs])
        if len(self.runs) < 2:
            return np.zeros(stacked.shape[1])
        return np.nanstd(stacked, axis=0, ddof=1) / math.sqrt(len(self.runs))

    def to_rows(self) -> List[Dict[str, Any]]:
        first = self.runs[0]
        return [
            {
                "mode": first.mode,
                "bin": k + 1,
                "lower_quantile": b.lower_quantile,
                "upper_quantile": b.upper_quantile,
                "accuracy": float(m),
                "std_error": float(s),
                "n_runs": len(self.runs),
            }
            for k, (b, m, s) in enumerate(
                zip(first.bins, self.mean_accuracy, self.std_error)
            )
        ]


RANK_PRESERVATION_COLUMNS = [
    "mode",
    "bin",
    "lower_quantile",
    "upper_quantile",
    "accuracy",
    "std_error",
    "n_runs",
]


def rank_preservation_probability(
    datasets: Sequence[Dataset],
    pool: Sequence[SearchSpace],
    budget: Union[Budget, int],
    empirical_scores: Union[Sequence[float], np.ndarray],
    config: Optional[ScoreConfig] = None,
    n_pairs: int = DEFAULT_N_PAIRS,
    quantile_bins: int = DEFAULT_QUANTILE_BINS,
    mode: str = RANK_MODE_RANDOM,
    seed: int = 0,
    fit_config: Optional[FitConfig] = None,
    verbose: bool = False,
) -> RankPreservationResult:
    """How often predicted scores preserve the empirical order of space pairs.

    One model is fitted per data draw; every pool member is scored under it
    and compared against the empirical scores, given either once for the
    whole pool or as one row per data draw.

    Raises:
        ValueError: If the pool has fewer than two spaces or scores are missing.
    """
    if len(pool) < 2:
        raise ValueError(f"Space pool needs at least 2 spaces, got {len(pool)}")
    if not datasets:
        raise ValueError("At least one data draw is required")
    empirical = np.asarray(empirical_scores, dtype=float)
    if empirical.ndim == 1:
        empirical = np.broadcast_to(empirical, (len(datasets), empirical.size))
    if empirical.shape != (len(datasets), len(pool)):
        raise ValueError(
            f"Empirical scores of shape {empirical.shape} do not match "
            f"{len(datasets)} draws of {len(pool)} spaces"
        )
    config = config or ScoreConfig()

    runs = []
    for r, data in enumerate(datasets):
        model = fit(data, seed=derive_seed(seed, "fit", r), config=fit_config)
        run_config = config.with_seed(derive_seed(config.seed, "run", r))
        iterator = tqdm(pool, desc=f"Draw {r + 1}", unit="space") if verbose else pool
        predicted = [
            predicted_score(model, space, budget, data.incumbent, run_config).value
            for space in iterator
        ]
        runs.append(
            rank_agreement(
                predicted,
                empirical[r],
                n_pairs=n_pairs,
                quantile_bins=quantile_bins,
                mode=mode,
                seed=derive_seed(seed, "pairs", r),
            )
        )
    return RankPreservationResult(runs=tuple(runs))
