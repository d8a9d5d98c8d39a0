"""Tests for config module."""

import pytest

from spacerank.config import (
    ExperimentSpec,
    FitConfig,
    GenerationSettings,
    ScoreConfig,
    parse_budgets,
    parse_rates,
)


class TestFitConfig:
    """Tests for FitConfig class."""

    def test_default_config(self):
        """Test default fit configuration."""
        config = FitConfig()
        config.validate()
        assert config.max_iterations == 3000
        assert config.n_restarts == 0
        assert config.fixed_noise_var is None

    def test_invalid_tolerance(self):
        """Test a non-positive gradient tolerance is rejected."""
        with pytest.raises(ValueError, match="gradient_tolerance"):
            FitConfig(gradient_tolerance=0.0).validate()

    def test_invalid_fixed_noise(self):
        """Test a non-positive pinned noise is rejected."""
        with pytest.raises(ValueError, match="fixed_noise_var"):
            FitConfig(fixed_noise_var=-1.0).validate()

    def test_from_dict(self):
        """Test building from a document."""
        config = FitConfig.from_dict({"n_restarts": 2, "fixed_noise_var": 1e-6})
        assert config.n_restarts == 2
        assert config.fixed_noise_var == 1e-6

    def test_from_dict_invalid_raises(self):
        """Test invalid documents raise ValueError."""
        with pytest.raises(ValueError, match="Invalid fit configuration"):
            FitConfig.from_dict({"memory": "lots"})


class TestScoreConfig:
    """Tests for ScoreConfig class."""

    def test_default_config(self):
        """Test default Monte Carlo settings."""
        config = ScoreConfig()
        config.validate()
        assert config.variant == "mean-bEI"
        assert config.n_x_batches == 1000
        assert config.n_posterior_samples == 1000
        assert config.include_noise is False

    def test_invalid_variant(self):
        """Test unknown variants are rejected."""
        with pytest.raises(ValueError, match="Invalid variant"):
            ScoreConfig(variant="max-bEI").validate()

    @pytest.mark.parametrize("seed", [-1, 2 ** 64])
    def test_invalid_seed(self, seed):
        """Test seeds outside [0, 2**64) are rejected."""
        with pytest.raises(ValueError, match="seed"):
            ScoreConfig(seed=seed).validate()

    def test_with_seed_keeps_other_fields(self):
        """Test with_seed only changes the seed."""
        config = ScoreConfig(variant="median-bPI", n_x_batches=7)
        reseeded = config.with_seed(42)
        assert reseeded.seed == 42
        assert reseeded.variant == "median-bPI"
        assert reseeded.n_x_batches == 7
        assert config.seed == 0

    def test_to_dict_omits_workers(self):
        """Test the serialized form leaves out max_workers."""
        doc = ScoreConfig(max_workers=8).to_dict()
        assert "max_workers" not in doc
        assert doc["variant"] == "mean-bEI"

    def test_from_dict_invalid_raises(self):
        """Test invalid documents raise ValueError."""
        with pytest.raises(ValueError, match="Invalid score configuration"):
            ScoreConfig.from_dict({"n_x_batches": 0})


class TestGenerationSettings:
    """Tests for GenerationSettings class."""

    def test_default_rates(self):
        """Test the default rate ladder."""
        settings = GenerationSettings()
        assert settings.rates[0] == 0.1
        assert settings.rates[-1] == 0.9
        assert settings.per_rate == 500
        assert settings.include_base

    def test_rate_string(self):
        """Test rates given as a range string."""
        settings = GenerationSettings.from_dict({"rates": "0.2:0.6:0.2"})
        assert settings.rates == [0.2, 0.4, 0.6]

    def test_invalid_rate(self):
        """Test rates outside (0, 1] are rejected."""
        with pytest.raises(ValueError):
            GenerationSettings(rates=[0.0]).validate()

    def test_empty_rates(self):
        """Test an empty rate list is rejected."""
        with pytest.raises(ValueError, match="At least one"):
            GenerationSettings(rates=[]).validate()


class TestExperimentSpec:
    """Tests for ExperimentSpec class."""

    def test_from_dict(self):
        """Test a complete experiment document."""
        spec = ExperimentSpec.from_dict(
            {
                "name": "demo",
                "objective": "branin",
                "budgets": "1:100:5-log",
                "n_repeats": 3,
                "score": {"n_x_batches": 10},
                "extra": {"rho": 0.1},
            }
        )
        assert spec.budgets == [1, 3, 10, 32, 100]
        assert spec.score.n_x_batches == 10
        assert spec.extra["rho"] == 0.1

    def test_missing_field(self):
        """Test a missing required field is reported."""
        with pytest.raises(ValueError, match="missing field"):
            ExperimentSpec.from_dict({"name": "demo"})

    def test_unknown_objective(self):
        """Test an unknown objective is rejected."""
        with pytest.raises(ValueError, match="Invalid objective"):
            ExperimentSpec.from_dict({"name": "demo", "objective": "ackley"})

    def test_b1_too_small(self):
        """Test b1 must leave enough points to fit a model."""
        with pytest.raises(ValueError, match="b1"):
            ExperimentSpec.from_dict({"name": "x", "objective": "branin", "b1": 1})

    def test_to_dict_round_trip(self):
        """Test the serialized spec loads back to an equal spec."""
        spec = ExperimentSpec.from_dict(
            {"name": "demo", "objective": "hartmann6", "b1": 10, "b2": 5}
        )
        assert ExperimentSpec.from_dict(spec.to_dict()) == spec


class TestParseBudgets:
    """Tests for parse_budgets function."""

    def test_comma_list(self):
        """Test a plain comma-separated list."""
        assert parse_budgets("1, 5,25") == [1, 5, 25]

    def test_log_sweep(self):
        """Test a log-spaced sweep is rounded and de-duplicated."""
        assert parse_budgets("1:4:6-log") == [1, 2, 3, 4]

    def test_single_point_sweep(self):
        """Test a sweep with one point."""
        assert parse_budgets("7:7:1-log") == [7]

    @pytest.mark.parametrize("value", ["", "0,5", "1:10:3", "10:1:3-log"])
    def test_invalid(self, value):
        """Test malformed budget lists are rejected."""
        with pytest.raises(ValueError):
            parse_budgets(value)


class TestParseRates:
    """Tests for parse_rates function."""

    def test_range(self):
        """Test a start:stop:step range."""
        assert parse_rates("0.1:0.9:0.1") == pytest.approx(
            [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
        )

    def test_list(self):
        """Test a comma-separated list."""
        assert parse_rates("0.25,1") == [0.25, 1.0]

    @pytest.mark.parametrize("value", ["0", "0.5,1.5", "0.1:0.5", "0.5:0.1:0.1"])
    def test_invalid(self, value):
        """Test malformed or out-of-range rates are rejected."""
        with pytest.raises(ValueError):
            parse_rates(value)
