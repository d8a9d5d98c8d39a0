"""Desk-scale experiment drivers behind ``spacerank reproduce``.

Each driver takes an ExperimentSpec and returns an ExperimentReport made of
CSV tables, a JSON summary and an optional narrative.
"""

import logging
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .bench import (
    CURVE_COLUMNS,
    CurveSummary,
    StudyLog,
    make_objective,
    random_search,
    replicate,
)
from .config import ExperimentSpec
from .constants import RANK_MODE_MAX, RANK_MODE_RANDOM, VALID_VARIANTS
from .core import Dataset, SearchSpace, derive_seed
from .file_utils import (
    RunManifest,
    ensure_directory_exists,
    format_json,
    parse_json,
    save_csv,
    save_run_manifest,
    save_text_file,
)
from .gp import fit
from .scoring import Objective, empirical_score, empirical_score_curve
from .spacegen import centered_subspace, propose_search_spaces
from .workflows import (
    RANK_PRESERVATION_COLUMNS,
    one_shot_prune,
    rank_preservation_probability,
    rank_spaces_curve,
    score_spaces,
)

logger = logging.getLogger(__name__)

SPEC_PACKAGE = "spacerank"
SPEC_DIRECTORY = "experiment_specs"


@dataclass
class ExperimentReport:
    name: str
    tables: Dict[str, Tuple[List[str], List[Dict[str, Any]]]] = field(
        default_factory=dict
    )
    summary: Dict[str, Any] = field(default_factory=dict)
    narrative: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "experiment": self.name,
            "tables": sorted(f"{name}.csv" for name in self.tables),
            "summary": self.summary,
        }


def _base_space(spec: ExperimentSpec, objective: Objective) -> SearchSpace:
    if spec.base_space is not None:
        return SearchSpace.from_dict(spec.base_space, name="base")
    return objective.space.with_name("base")


def _objective(spec: ExperimentSpec, seed: int) -> Objective:
    return make_objective(
        spec.objective, noise_sd=spec.noise_sd, seed=seed, **spec.extra
    )


def _score_config(spec: ExperimentSpec, inner_workers: int):
    return replace(spec.score, max_workers=inner_workers)


def run_branin_ranking(
    spec: ExperimentSpec, max_workers: int = 1, verbose: bool = False
) -> ExperimentReport:
    """Rank the base space against sub-spaces centered on the best and worst
    seed points, with predicted and empirical curves."""
    rho = float(spec.extra.get("rho", 0.1))
    n_trials = int(spec.extra.get("empirical_trials", 1000))
    config = _score_config(spec, max_workers)
    rows: List[Dict[str, Any]] = []
    worst_last = 0
    crossovers: List[Optional[int]] = []

    for r in range(spec.n_repeats):
        seed = derive_seed(spec.seed, "repeat", r)
        objective = _objective(spec, seed)
        base = _base_space(spec, objective).with_name("X")
        data = random_search(objective, base, spec.n_seed_points, seed).to_dataset(base)
        worst = data.obs[int(np.argmax(data.y))]
        spaces = [
            base,
            centered_subspace(base, data.best.x, rho).with_name("S1"),
            centered_subspace(base, worst.x, rho).with_name("S2"),
        ]
        rankings = rank_spaces_curve(
            data, spaces, spec.budgets, config.with_seed(seed), spec.fit
        )
        if all(result.order[-1] == "S2" for result in rankings):
            worst_last += 1

        crossover = next(
            (
                result.budget.b
                for result in rankings
                if result.score_of("X").value > result.score_of("S1").value
            ),
            None,
        )
        crossovers.append(crossover)

        for space in spaces:
            empirical = empirical_score_curve(
                objective,
                space,
                spec.budgets,
                data.incumbent,
                config.variant,
                n_trials,
                derive_seed(seed, "empirical"),
            )
            for result, emp in zip(rankings, empirical):
                pred = result.score_of(space.name)
                rows.append(
                    {
                        "repeat": r,
                        "space_id": space.name,
                        "budget": result.budget.b,
                        "predicted": pred.value,
                        "predicted_se": pred.std_error,
                        "empirical": emp.value,
                        "empirical_se": emp.std_error,
                    }
                )

    columns = [
        "repeat",
        "space_id",
        "budget",
        "predicted",
        "predicted_se",
        "empirical",
        "empirical_se",
    ]
    seen = [c for c in crossovers if c is not None]
    narrative = (
        f"S2 ranked last at every budget in {worst_last} of {spec.n_repeats} repeats. "
        f"X overtook S1 within the budget range in {len(seen)} repeats"
        + (f" (earliest budget {min(seen)})." if seen else ".")
    )
    return ExperimentReport(
        name=spec.name,
        tables={"scores": (columns, rows)},
        summary={
            "repeats": spec.n_repeats,
            "worst_space_last_everywhere": worst_last,
            "x_over_s1_budgets": crossovers,
        },
        narrative=narrative,
    )


def _prune_log(
    spec: ExperimentSpec, b1: int, b2: int, variant: str, inner_workers: int
) -> Callable[[int], StudyLog]:
    def run(seed: int) -> StudyLog:
        objective = _objective(spec, seed)
        result = one_shot_prune(
            objective,
            _base_space(spec, objective),
            b1,
            b2,
            spec.generation,
            _score_config(spec, inner_workers).with_variant(variant),
            seed=seed,
            fit_config=spec.fit,
        )
        return result.log

    return run


def _baseline_log(spec: ExperimentSpec, n: int) -> Callable[[int], StudyLog]:
    def run(seed: int) -> StudyLog:
        objective = _objective(spec, seed)
        return random_search(
            objective, _base_space(spec, objective), n, derive_seed(seed, "baseline")
        )

    return run


def _paired_summary(
    pruned: CurveSummary, baseline: CurveSummary, b1: int
) -> Dict[str, Any]:
    difference = baseline.mean - pruned.mean
    if np.allclose(pruned.final_values, baseline.final_values):
        p_value = 1.0
    else:
        p_value = float(
            stats.ttest_rel(
                pruned.final_values, baseline.final_values, alternative="less"
            ).pvalue
        )
    return {
        "pruned_final_mean": float(pruned.mean[-1]),
        "baseline_final_mean": float(baseline.mean[-1]),
        "paired_p_value": p_value,
        "improvement_positive_after_b1_plus_10": bool(
            np.all(difference[b1 + 10 :] > 0)
        ),
    }


def _pruning_sweep(
    spec: ExperimentSpec,
    splits: Sequence[Tuple[int, int]],
    variants: Sequence[str],
    max_workers: int,
    verbose: bool,
) -> ExperimentReport:
    curves: List[Dict[str, Any]] = []
    finals: List[Dict[str, Any]] = []
    summary: Dict[str, Any] = {}

    for b1, b2 in splits:
        baseline = replicate(
            _baseline_log(spec, b1 + b2),
            spec.n_repeats,
            spec.seed,
            max_workers=max_workers,
            verbose=verbose,
        )
        curves += baseline.to_rows(label=f"random-search/B={b1 + b2}")
        for variant in variants:
            label = f"pruned/{variant}/b1={b1}/b2={b2}"
            pruned = replicate(
                _prune_log(spec, b1, b2, variant, 1),
                spec.n_repeats,
                spec.seed,
                max_workers=max_workers,
                verbose=verbose,
            )
            curves += pruned.to_rows(label=label)
            paired = _paired_summary(pruned, baseline, b1)
            summary[label] = paired
            finals.append(
                {
                    "b1": b1,
                    "b2": b2,
                    "variant": variant,
                    "pruned_final_mean": paired["pruned_final_mean"],
                    "pruned_final_se": float(pruned.std_error[-1]),
                    "baseline_final_mean": paired["baseline_final_mean"],
                    "baseline_final_se": float(baseline.std_error[-1]),
                    "paired_p_value": paired["paired_p_value"],
                }
            )
            logger.info(f"{label}: {paired}")

    return ExperimentReport(
        name=spec.name,
        tables={
            "curves": (CURVE_COLUMNS, curves),
            "finals": (list(finals[0].keys()) if finals else [], finals),
        },
        summary=summary,
    )


def _split(spec: ExperimentSpec) -> Tuple[int, int]:
    return spec.b1, spec.b2


def run_hartmann_pruning(
    spec: ExperimentSpec, max_workers: int = 1, verbose: bool = False
) -> ExperimentReport:
    """Score-guided pruning against plain random search at the same total budget."""
    return _pruning_sweep(
        spec, [_split(spec)], [spec.score.variant], max_workers, verbose
    )


def run_budget_splits(
    spec: ExperimentSpec, max_workers: int = 1, verbose: bool = False
) -> ExperimentReport:
    """Pruning at a fixed total budget for several b1/b2 splits and all variants."""
    total = spec.b1 + spec.b2
    b1_values = spec.extra.get("b1_values", [spec.b1])
    splits = [(int(b1), total - int(b1)) for b1 in b1_values]
    variants = spec.extra.get("variants", VALID_VARIANTS)
    return _pruning_sweep(spec, splits, variants, max_workers, verbose)


def run_score_variants(
    spec: ExperimentSpec, max_workers: int = 1, verbose: bool = False
) -> ExperimentReport:
    """Pruning with each score variant at one split."""
    variants = spec.extra.get("variants", VALID_VARIANTS)
    return _pruning_sweep(spec, [_split(spec)], variants, max_workers, verbose)


def run_model_quality(
    spec: ExperimentSpec, max_workers: int = 1, verbose: bool = False
) -> ExperimentReport:
    """Vary b1 with b2 fixed to see how model quality drives pruning gains."""
    splits = [(int(b1), spec.b2) for b1 in spec.extra.get("b1_values", [spec.b1])]
    return _pruning_sweep(spec, splits, [spec.score.variant], max_workers, verbose)


def run_rank_preservation(
    spec: ExperimentSpec, max_workers: int = 1, verbose: bool = False
) -> ExperimentReport:
    """Agreement between predicted and empirical orderings of a space pool."""
    n_trials = int(spec.extra.get("empirical_trials", 200))
    n_pairs = int(spec.extra.get("n_pairs", 2000))
    quantile_bins = int(spec.extra.get("quantile_bins", 4))
    budget = spec.budgets[0]
    config = _score_config(spec, max_workers)

    objective = _objective(spec, spec.seed)
    base = _base_space(spec, objective)
    pool = propose_search_spaces(
        base,
        spec.generation.rates,
        spec.generation.per_rate,
        derive_seed(spec.seed, "pool"),
    )
    datasets = [
        random_search(
            objective, base, spec.n_seed_points, derive_seed(spec.seed, "data", r)
        ).to_dataset(base)
        for r in range(spec.n_repeats)
    ]
    empirical = np.array(
        [
            [
                empirical_score(
                    objective,
                    space,
                    budget,
                    data.incumbent,
                    config.variant,
                    n_trials,
                    derive_seed(spec.seed, "empirical", r, k),
                ).value
                for k, space in enumerate(pool)
            ]
            for r, data in enumerate(datasets)
        ]
    )

    rows: List[Dict[str, Any]] = []
    summary: Dict[str, Any] = {"pool_size": len(pool), "runs": spec.n_repeats}
    for mode in (RANK_MODE_RANDOM, RANK_MODE_MAX):
        result = rank_preservation_probability(
            datasets,
            pool,
            budget,
            empirical,
            config,
            n_pairs=n_pairs,
            quantile_bins=quantile_bins,
            mode=mode,
            seed=derive_seed(spec.seed, "pairs"),
            fit_config=spec.fit,
            verbose=verbose,
        )
        rows += result.to_rows()
        accuracy = result.mean_accuracy
        summary[mode] = {
            "accuracy_by_bin": accuracy.tolist(),
            "top_minus_bottom": float(accuracy[-1] - accuracy[0]),
        }
    return ExperimentReport(
        name=spec.name,
        tables={"rank_preservation": (RANK_PRESERVATION_COLUMNS, rows)},
        summary=summary,
    )


def run_failure_mode(
    spec: ExperimentSpec, max_workers: int = 1, verbose: bool = False
) -> ExperimentReport:
    """Fit on a handful of points from a bad region and compare predicted with
    empirical separation of good and bad spaces."""
    rho = float(spec.extra.get("rho", 0.1))
    n_candidates = int(spec.extra.get("n_candidates", 200))
    n_trials = int(spec.extra.get("empirical_trials", 1000))
    config = _score_config(spec, max_workers)

    objective = _objective(spec, spec.seed)
    base = _base_space(spec, objective).with_name("X")
    pool = random_search(objective, base, n_candidates, derive_seed(spec.seed, "pool"))
    worst = np.argsort(pool.y)[::-1][: spec.n_seed_points]
    data = Dataset(base, tuple(pool.evals[i] for i in sorted(worst)))

    good_center = spec.extra.get("good_center", [np.pi, 2.275])
    spaces = [
        base,
        centered_subspace(base, good_center, rho).with_name("good"),
        centered_subspace(base, data.best.x, rho).with_name("bad"),
    ]
    model = fit(data, seed=spec.seed, config=spec.fit)
    predicted = score_spaces(model, spaces, spec.budgets, data.incumbent, config)

    rows: List[Dict[str, Any]] = []
    for space, curve in zip(spaces, predicted):
        empirical = empirical_score_curve(
            objective,
            space,
            spec.budgets,
            data.incumbent,
            config.variant,
            n_trials,
            derive_seed(spec.seed, "empirical"),
        )
        for pred, emp in zip(curve, empirical):
            rows.append(
                {
                    "space_id": space.name,
                    "budget": pred.budget.b,
                    "predicted": pred.value,
                    "predicted_se": pred.std_error,
                    "empirical": emp.value,
                    "empirical_se": emp.std_error,
                }
            )

    largest = [r for r in rows if r["budget"] == max(spec.budgets)]
    by_space = {r["space_id"]: r for r in largest}
    pred_gap = by_space["good"]["predicted"] - by_space["bad"]["predicted"]
    emp_gap = by_space["good"]["empirical"] - by_space["bad"]["empirical"]
    narrative = (
        f"Model fitted on the {data.n} worst of {n_candidates} random points "
        f"(incumbent {data.incumbent:.4g}). At budget {max(spec.budgets)} the "
        f"empirical score separates the good and bad spaces by {emp_gap:.4g}, "
        f"while the predicted scores differ by {pred_gap:.4g}."
    )
    return ExperimentReport(
        name=spec.name,
        tables={"scores": (list(rows[0].keys()), rows)},
        summary={"predicted_gap": pred_gap, "empirical_gap": emp_gap},
        narrative=narrative,
    )


EXPERIMENTS: Dict[str, Callable[..., ExperimentReport]] = {
    "branin-ranking": run_branin_ranking,
    "hartmann-pruning": run_hartmann_pruning,
    "rank-preservation": run_rank_preservation,
    "budget-splits": run_budget_splits,
    "score-variants": run_score_variants,
    "model-quality": run_model_quality,
    "failure-mode": run_failure_mode,
}


def available_experiments() -> List[str]:
    return sorted(EXPERIMENTS)


def load_experiment_spec(name: str) -> ExperimentSpec:
    """Load a shipped experiment spec by name.

    Raises:
        ValueError: If no experiment has that name.
    """
    if name not in EXPERIMENTS:
        raise ValueError(
            f"Unknown experiment '{name}'. "
            f"Available: {', '.join(available_experiments())}"
        )
    resource = resources.files(SPEC_PACKAGE) / SPEC_DIRECTORY / f"{name}.json"
    doc = parse_json(resource.read_text(encoding="utf-8"), path=str(resource))
    return ExperimentSpec.from_dict(doc)


def run_experiment(
    spec: ExperimentSpec, max_workers: int = 1, verbose: bool = False
) -> ExperimentReport:
    driver = EXPERIMENTS.get(spec.name)
    if driver is None:
        raise ValueError(
            f"Unknown experiment '{spec.name}'. "
            f"Available: {', '.join(available_experiments())}"
        )
    logger.info(f"Running experiment '{spec.name}'")
    return driver(spec, max_workers=max_workers, verbose=verbose)


def write_report(
    report: ExperimentReport, output_dir: str, manifest: RunManifest
) -> List[str]:
    """Write tables, summary, narrative and manifest; return written paths."""
    ensure_directory_exists(output_dir)
    paths = []
    for table, (columns, rows) in sorted(report.tables.items()):
        path = os.path.join(output_dir, f"{report.name}_{table}.csv")
        save_csv(path, columns, rows, manifest)
        paths.append(path)
    summary_path = os.path.join(output_dir, f"{report.name}_summary.json")
    save_text_file(summary_path, format_json(report.to_dict()))
    paths.append(summary_path)
    if report.narrative:
        narrative_path = os.path.join(output_dir, f"{report.name}_report.txt")
        save_text_file(narrative_path, report.narrative + "\n")
        paths.append(narrative_path)
    paths.append(save_run_manifest(output_dir, manifest))
    return paths
