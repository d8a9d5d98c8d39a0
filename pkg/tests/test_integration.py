"""End-to-end runs of the shipped experiments and large-sample oracle checks.

The slow classes take minutes; deselect them with ``-m "not slow"``.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from spacerank.bench import single_point_ei_oracle
from spacerank.config import ScoreConfig
from spacerank.core import Dataset, ParamDomain, SearchSpace, uniform_sample, volume
from spacerank.experiments import (
    available_experiments,
    load_experiment_spec,
    run_experiment,
    write_report,
)
from spacerank.file_utils import RunManifest
from spacerank.gp import KernelParams, build_model
from spacerank.scoring import predicted_score, predicted_score_curve
from spacerank.spacegen import random_subspace


class TestExperimentSpecs:
    """Tests for the shipped experiment specs."""

    @pytest.mark.parametrize("name", available_experiments())
    def test_every_spec_loads(self, name):
        """Test each shipped spec parses and validates."""
        spec = load_experiment_spec(name)
        assert spec.name == name

    def test_unknown_spec(self):
        """Test unknown experiment names are rejected."""
        with pytest.raises(ValueError, match="Unknown experiment"):
            load_experiment_spec("cifar100")

    def test_small_run_independent_of_workers(self, tmp_path):
        """Test a shrunken experiment gives the same report for any worker count."""
        spec = load_experiment_spec("hartmann-pruning")
        spec = replace(
            spec,
            b1=6,
            b2=4,
            n_repeats=3,
            generation=replace(spec.generation, rates=[0.5], per_rate=2),
            score=replace(spec.score, n_x_batches=10, n_posterior_samples=10),
        )
        serial = run_experiment(spec, max_workers=1)
        threaded = run_experiment(spec, max_workers=3)
        assert serial.to_dict() == threaded.to_dict()
        assert serial.tables == threaded.tables

        manifest = RunManifest(command="reproduce", seed=spec.seed)
        paths = write_report(serial, str(tmp_path), manifest)
        assert any(path.endswith("hartmann-pruning_curves.csv") for path in paths)


@pytest.mark.slow
class TestOracleAcceptance:
    """Large-sample checks of the estimators against closed forms."""

    def test_single_point_ei_fuzzed(self):
        """Test b=1 scores on point spaces against closed-form EI."""
        rng = np.random.default_rng(11)
        space = SearchSpace((ParamDomain("x1"), ParamDomain("x2")))
        config = ScoreConfig(n_x_batches=100, n_posterior_samples=1000)
        for case in range(50):
            x = uniform_sample(space, 8, seed=case)
            data = Dataset.from_arrays(space, x, rng.standard_normal(8))
            model = build_model(data, KernelParams(1.0, [2.0, 2.0], 0.05))
            point = rng.random(2)
            mean, var = model.predict(point[None, :])
            mu, sigma = float(mean[0]), math.sqrt(float(var[0]))
            incumbent = mu + rng.uniform(-1.0, 2.0) * sigma
            point_space = SearchSpace(
                tuple(
                    ParamDomain(f"x{i + 1}", lower=v, upper=v)
                    for i, v in enumerate(point)
                )
            )
            estimate = predicted_score(model, point_space, 1, incumbent, config)
            oracle = single_point_ei_oracle(mu, sigma, incumbent)
            tolerance = 1e-4 if oracle < 1e-2 else 0.01 * oracle
            assert abs(estimate.value - oracle) <= max(
                tolerance, 4 * estimate.std_error
            )

    def test_monotone_over_fuzzed_models(self):
        """Test exact budget monotonicity over random models and spaces."""
        rng = np.random.default_rng(12)
        config = ScoreConfig(n_x_batches=50, n_posterior_samples=100)
        for case in range(20):
            d = int(rng.integers(1, 5))
            base = SearchSpace(tuple(ParamDomain(f"x{i}") for i in range(d)))
            x = uniform_sample(base, 10, seed=case)
            data = Dataset.from_arrays(base, x, rng.standard_normal(10))
            params = KernelParams(
                rng.uniform(0.5, 2.0), rng.uniform(0.5, 5.0, d), rng.uniform(0.01, 0.2)
            )
            model = build_model(data, params)
            space = random_subspace(base, rng.uniform(0.1, 1.0), seed=case)
            curve = predicted_score_curve(
                model, space, list(range(1, 51)), data.incumbent, config
            )
            values = [estimate.value for estimate in curve]
            assert all(b >= a for a, b in zip(values, values[1:]))

    def test_subspace_volume_fuzzed(self):
        """Test generated volumes over many random bases and rates."""
        rng = np.random.default_rng(13)
        for case in range(10000):
            d = int(rng.integers(1, 8))
            lower = rng.uniform(-3.0, 3.0, d)
            base = SearchSpace(
                tuple(
                    ParamDomain(f"x{i}", lower=lo, upper=lo + rng.uniform(0.5, 4.0))
                    for i, lo in enumerate(lower)
                )
            )
            rho = float(rng.uniform(0.05, 1.0))
            sub = random_subspace(base, rho, seed=case)
            assert volume(sub) == pytest.approx(rho * volume(base), rel=1e-12)
            assert sub.is_subset_of(base)


@pytest.mark.slow
class TestDeskScaleExperiments:
    """Desk-scale runs of the shipped experiments against their expected trends."""

    def test_branin_worst_space_ranked_last(self):
        """Test the space around the worst seed point ranks last almost always."""
        spec = load_experiment_spec("branin-ranking")
        report = run_experiment(spec, max_workers=4)
        assert report.summary["worst_space_last_everywhere"] >= 9

    def test_hartmann_pruning_beats_random_search(self):
        """Test pruning lowers the final best value against random search."""
        spec = load_experiment_spec("hartmann-pruning")
        report = run_experiment(spec, max_workers=4)
        (paired,) = report.summary.values()
        assert paired["pruned_final_mean"] < paired["baseline_final_mean"]
        assert paired["paired_p_value"] < 0.05
        assert paired["improvement_positive_after_b1_plus_10"]

    def test_rank_preservation_rises_with_distance(self):
        """Test far-apart pairs are ordered correctly more often than close ones."""
        spec = load_experiment_spec("rank-preservation")
        report = run_experiment(spec, max_workers=4)
        assert report.summary["random"]["top_minus_bottom"] >= 0.05
