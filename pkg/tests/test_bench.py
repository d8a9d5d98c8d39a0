"""Tests for bench module."""

import numpy as np
import pytest

from spacerank.bench import (
    GridTableObjective,
    StudyLog,
    SyntheticObjective,
    aggregate_logs,
    branin,
    grid_min_order_statistics_oracle,
    hartmann6,
    make_objective,
    random_search,
    replicate,
    single_point_ei_oracle,
    single_point_pi_oracle,
)
from spacerank.constants import (
    BRANIN_MINIMIZERS,
    BRANIN_MINIMUM,
    HARTMANN6_MINIMIZER,
    HARTMANN6_MINIMUM,
)
from spacerank.core import OutOfDomainError


class TestObjectives:
    """Tests for the closed-form objectives."""

    def test_branin_minimizers(self):
        """Test every Branin minimizer attains the known minimum."""
        values = branin(np.array(BRANIN_MINIMIZERS))
        np.testing.assert_allclose(values, BRANIN_MINIMUM, atol=1e-5)

    def test_hartmann6_minimizer(self):
        """Test Hartmann-6 at its minimizer."""
        assert hartmann6(np.array(HARTMANN6_MINIMIZER)) == pytest.approx(
            HARTMANN6_MINIMUM, abs=1e-4
        )

    def test_branin_origin(self):
        """Test Branin at the origin against direct evaluation."""
        assert branin(np.zeros(2)) == pytest.approx(55.602113, abs=1e-5)

    def test_hartmann6_not_symmetric(self):
        """Test reversing the coordinates changes the value."""
        x = np.random.default_rng(3).random(6)
        assert hartmann6(x) != pytest.approx(hartmann6(x[::-1]))

    def test_hartmann6_out_of_domain(self):
        """Test coordinates outside the unit cube are rejected."""
        with pytest.raises(OutOfDomainError, match="x3"):
            hartmann6(np.array([0.5, 0.5, 1.5, 0.5, 0.5, 0.5]))

    def test_vectorized_shapes(self):
        """Test batched evaluation keeps the leading shape."""
        x = np.random.default_rng(0).random((3, 4, 6))
        assert np.shape(hartmann6(x)) == (3, 4)

    def test_noise_is_reproducible(self):
        """Test noisy objectives repeat under the same seed."""
        x = np.array([[0.0, 5.0], [1.0, 2.0]])
        a = SyntheticObjective("branin", noise_sd=0.5, seed=1)(x)
        b = SyntheticObjective("branin", noise_sd=0.5, seed=1)(x)
        np.testing.assert_array_equal(a, b)
        assert not np.allclose(a, branin(x))

    def test_noise_averages_to_noiseless(self):
        """Test the mean of 10^4 noisy evaluations is within 4 standard errors."""
        objective = SyntheticObjective("branin", noise_sd=2.0, seed=5)
        point = np.array([1.0, 7.5])
        values = objective(np.tile(point, (10000, 1)))
        standard_error = 2.0 / np.sqrt(values.size)
        assert abs(values.mean() - branin(point)) <= 4 * standard_error

    def test_unknown_objective(self):
        """Test unknown names are rejected."""
        with pytest.raises(ValueError, match="Invalid objective"):
            make_objective("rosenbrock")

    def test_constant_objective(self):
        """Test the constant objective returns its value everywhere."""
        objective = make_objective("constant", constant=2.5, d=3)
        np.testing.assert_array_equal(objective(np.zeros((4, 3))), 2.5)

    def test_grid_table(self):
        """Test the piecewise-constant table indexes by floor."""
        objective = GridTableObjective([3.0, 1.0, 2.0])
        np.testing.assert_array_equal(
            objective(np.array([[0.5], [1.0], [2.9], [3.0]])), [3.0, 1.0, 2.0, 2.0]
        )
        assert objective.space.dims[0].upper == 3.0


class TestOracles:
    """Tests for closed-form oracles."""

    def test_ei_zero_sigma(self):
        """Test a degenerate Gaussian gives plain improvement."""
        assert single_point_ei_oracle(1.0, 0.0, 3.0) == 2.0
        assert single_point_ei_oracle(4.0, 0.0, 3.0) == 0.0

    def test_ei_at_incumbent(self):
        """Test EI equals sigma * phi(0) when mu is the incumbent."""
        assert single_point_ei_oracle(0.0, 2.0, 0.0) == pytest.approx(
            2.0 / np.sqrt(2 * np.pi)
        )

    def test_pi_at_incumbent(self):
        """Test PI is one half at the incumbent."""
        assert single_point_pi_oracle(1.0, 0.3, 1.0) == pytest.approx(0.5)

    def test_negative_sigma(self):
        """Test negative sigma is rejected."""
        with pytest.raises(ValueError):
            single_point_ei_oracle(0.0, -1.0, 0.0)

    def test_order_statistics_brute_force(self):
        """Test the oracle against enumeration of all draws."""
        values = [0.3, -1.0, 2.0]
        expected = np.mean([max(0.0, 1.0 - min(a, b)) for a in values for b in values])
        assert grid_min_order_statistics_oracle(values, 2, 1.0) == pytest.approx(
            expected
        )


class TestStudyLog:
    """Tests for StudyLog and aggregation."""

    def test_best_curve(self):
        """Test the running best never increases."""
        log = StudyLog.from_arrays(np.zeros((4, 1)), np.array([3.0, 1.0, 2.0, 0.5]))
        np.testing.assert_array_equal(log.best_curve, [3.0, 1.0, 1.0, 0.5])
        assert log.best.y == 0.5

    def test_then_marks_phase_boundary(self):
        """Test concatenation records where the first log ends."""
        a = StudyLog.from_arrays(np.zeros((2, 1)), np.array([1.0, 2.0]))
        b = StudyLog.from_arrays(np.zeros((3, 1)), np.array([0.0, 1.0, 2.0]))
        joined = a.then(b)
        assert len(joined) == 5
        assert joined.phase_boundary == 2

    def test_empty_log_has_no_best(self):
        """Test an empty log raises on best."""
        with pytest.raises(ValueError):
            StudyLog(()).best

    def test_aggregate_misaligned(self):
        """Test logs of different lengths are rejected."""
        a = StudyLog.from_arrays(np.zeros((2, 1)), np.array([1.0, 2.0]))
        b = StudyLog.from_arrays(np.zeros((3, 1)), np.array([1.0, 2.0, 3.0]))
        with pytest.raises(ValueError, match="misaligned"):
            aggregate_logs([a, b])

    def test_aggregate_mean(self):
        """Test per-step mean of best-so-far curves."""
        a = StudyLog.from_arrays(np.zeros((2, 1)), np.array([2.0, 1.0]))
        b = StudyLog.from_arrays(np.zeros((2, 1)), np.array([4.0, 5.0]))
        summary = aggregate_logs([a, b])
        np.testing.assert_allclose(summary.mean, [3.0, 2.5])
        assert summary.n_repeats == 2
        assert [row["step"] for row in summary.to_rows("x")] == [1, 2]


class TestRandomSearch:
    """Tests for random_search and replicate."""

    def test_random_search_in_space(self):
        """Test every evaluated point lies in the space."""
        objective = make_objective("branin")
        log = random_search(objective, objective.space, 20, seed=0)
        assert len(log) == 20
        assert all(objective.space.contains(o.x) for o in log.evals)

    def test_sphere_best_reaches_origin(self):
        """Test 10^4 uniform points on [-1, 1]^2 land within 0.1 of the origin."""
        objective = make_objective("sphere")
        finals = [
            random_search(objective, objective.space, 10000, seed=s).best.y
            for s in range(20)
        ]
        assert sum(value < 0.01 for value in finals) >= 19

    def test_single_step_and_constant_curves(self):
        """Test one evaluation gives a one-step curve and constants stay flat."""
        objective = make_objective("constant", constant=1.5)
        log = random_search(objective, objective.space, 1, seed=0)
        np.testing.assert_array_equal(log.best_curve, [1.5])
        log = random_search(objective, objective.space, 6, seed=0)
        np.testing.assert_array_equal(log.best_curve, 1.5)

    def test_replicate_needs_two_repeats(self):
        """Test a single repeat is rejected."""
        with pytest.raises(ValueError, match="n_repeats"):
            replicate(lambda s: StudyLog(()), 1, seed=0)

    def test_replicate_independent_of_workers(self):
        """Test the aggregate is the same for any worker count."""
        objective = make_objective("hartmann6")

        def run(seed):
            return random_search(objective, objective.space, 10, seed)

        serial = replicate(run, 6, seed=3, max_workers=1)
        threaded = replicate(run, 6, seed=3, max_workers=3)
        np.testing.assert_array_equal(serial.mean, threaded.mean)
        np.testing.assert_array_equal(serial.final_values, threaded.final_values)
