"""Configuration parsing and validation for spacerank."""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Mapping, Optional

import numpy as np

from .constants import (
    DEFAULT_GRADIENT_TOLERANCE,
    DEFAULT_LBFGS_MEMORY,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_N_BOOTSTRAP,
    DEFAULT_N_POSTERIOR_SAMPLES,
    DEFAULT_N_RESTARTS,
    DEFAULT_N_X_BATCHES,
    DEFAULT_PER_RATE,
    DEFAULT_RATES,
    DEFAULT_SEED,
    DEFAULT_VARIANT,
    MIN_TRAINING_POINTS,
    VALID_OBJECTIVES,
    VALID_VARIANTS,
)

logger = logging.getLogger(__name__)


@dataclass
class FitConfig:
    """Settings for marginal-likelihood fitting of the GP."""

    max_iterations: int = DEFAULT_MAX_ITERATIONS
    gradient_tolerance: float = DEFAULT_GRADIENT_TOLERANCE
    memory: int = DEFAULT_LBFGS_MEMORY
    n_restarts: int = DEFAULT_N_RESTARTS
    fixed_noise_var: Optional[float] = None

    def validate(self) -> None:
        """Validate all configuration values.

        Raises:
            ValueError: If any configuration value is invalid.
        """
        if self.max_iterations < 1:
            raise ValueError(
                f"Invalid max_iterations {self.max_iterations}. Must be >= 1"
            )
        if not self.gradient_tolerance > 0:
            raise ValueError(
                f"Invalid gradient_tolerance {self.gradient_tolerance}. Must be > 0"
            )
        if self.memory < 1:
            raise ValueError(f"Invalid memory {self.memory}. Must be >= 1")
        if self.n_restarts < 0:
            raise ValueError(f"Invalid n_restarts {self.n_restarts}. Must be >= 0")
        if self.fixed_noise_var is not None and not (
            math.isfinite(self.fixed_noise_var) and self.fixed_noise_var > 0
        ):
            raise ValueError(
                f"Invalid fixed_noise_var {self.fixed_noise_var}. Must be positive"
            )

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "FitConfig":
        try:
            fixed = doc.get("fixed_noise_var")
            config = cls(
                max_iterations=int(doc.get("max_iterations", DEFAULT_MAX_ITERATIONS)),
                gradient_tolerance=float(
                    doc.get("gradient_tolerance", DEFAULT_GRADIENT_TOLERANCE)
                ),
                memory=int(doc.get("memory", DEFAULT_LBFGS_MEMORY)),
                n_restarts=int(doc.get("n_restarts", DEFAULT_N_RESTARTS)),
                fixed_noise_var=float(fixed) if fixed is not None else None,
            )
            config.validate()
            return config
        except (TypeError, ValueError) as e:
            raise ValueError(f"Invalid fit configuration: {e}")


@dataclass
class ScoreConfig:
    """Monte Carlo settings for a search-space score."""

    variant: str = DEFAULT_VARIANT
    n_x_batches: int = DEFAULT_N_X_BATCHES
    n_posterior_samples: int = DEFAULT_N_POSTERIOR_SAMPLES
    seed: int = DEFAULT_SEED
    include_noise: bool = False
    n_bootstrap: int = DEFAULT_N_BOOTSTRAP
    max_workers: int = 1

    def validate(self) -> None:
        """Validate all configuration values.

        Raises:
            ValueError: If any configuration value is invalid.
        """
        if self.variant not in VALID_VARIANTS:
            raise ValueError(
                f"Invalid variant '{self.variant}'. "
                f"Must be one of: {', '.join(VALID_VARIANTS)}"
            )
        if self.n_x_batches < 1:
            raise ValueError(f"Invalid n_x_batches {self.n_x_batches}. Must be >= 1")
        if self.n_posterior_samples < 1:
            raise ValueError(
                f"Invalid n_posterior_samples {self.n_posterior_samples}. Must be >= 1"
            )
        if not (0 <= self.seed < 2 ** 64):
            raise ValueError(f"Invalid seed {self.seed}. Must be in [0, 2**64)")
        if self.n_bootstrap < 1:
            raise ValueError(f"Invalid n_bootstrap {self.n_bootstrap}. Must be >= 1")
        if self.max_workers < 1:
            raise ValueError(f"Invalid max_workers {self.max_workers}. Must be >= 1")

    def with_seed(self, seed: int) -> "ScoreConfig":
        return ScoreConfig(**{**asdict(self), "seed": seed})

    def with_variant(self, variant: str) -> "ScoreConfig":
        return ScoreConfig(**{**asdict(self), "variant": variant})

    def to_dict(self) -> Dict[str, Any]:
        """Serializable form; max_workers is omitted since it never changes results."""
        doc = asdict(self)
        doc.pop("max_workers")
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ScoreConfig":
        try:
            config = cls(
                variant=str(doc.get("variant", DEFAULT_VARIANT)),
                n_x_batches=int(doc.get("n_x_batches", DEFAULT_N_X_BATCHES)),
                n_posterior_samples=int(
                    doc.get("n_posterior_samples", DEFAULT_N_POSTERIOR_SAMPLES)
                ),
                seed=int(doc.get("seed", DEFAULT_SEED)),
                include_noise=bool(doc.get("include_noise", False)),
                n_bootstrap=int(doc.get("n_bootstrap", DEFAULT_N_BOOTSTRAP)),
                max_workers=int(doc.get("max_workers", 1)),
            )
            config.validate()
            return config
        except (TypeError, ValueError) as e:
            raise ValueError(f"Invalid score configuration: {e}")


@dataclass
class GenerationSettings:
    """Candidate-space proposal settings for pruning."""

    rates: List[float] = field(default_factory=lambda: list(DEFAULT_RATES))
    per_rate: int = DEFAULT_PER_RATE
    include_base: bool = True

    def validate(self) -> None:
        if not self.rates:
            raise ValueError("At least one reduction rate is required")
        for rho in self.rates:
            if not (0 < rho <= 1):
                raise ValueError(f"Invalid reduction rate {rho}. Must be in (0, 1]")
        if self.per_rate < 1:
            raise ValueError(f"Invalid per_rate {self.per_rate}. Must be >= 1")

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "GenerationSettings":
        try:
            rates = doc.get("rates", DEFAULT_RATES)
            if isinstance(rates, str):
                rates = parse_rates(rates)
            settings = cls(
                rates=[float(r) for r in rates],
                per_rate=int(doc.get("per_rate", DEFAULT_PER_RATE)),
                include_base=bool(doc.get("include_base", True)),
            )
            settings.validate()
            return settings
        except (TypeError, ValueError) as e:
            raise ValueError(f"Invalid generation settings: {e}")


@dataclass
class ExperimentSpec:
    """A reproducible experiment description loaded from JSON."""

    name: str
    objective: str
    budgets: List[int] = field(default_factory=list)
    b1: int = 0
    b2: int = 0
    n_seed_points: int = 0
    n_repeats: int = 1
    seed: int = DEFAULT_SEED
    noise_sd: float = 0.0
    base_space: Optional[Dict[str, Any]] = None
    generation: GenerationSettings = field(default_factory=GenerationSettings)
    score: ScoreConfig = field(default_factory=ScoreConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    extra: Dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        if not self.name:
            raise ValueError("Experiment name is required")
        if self.objective not in VALID_OBJECTIVES:
            raise ValueError(
                f"Invalid objective '{self.objective}'. "
                f"Must be one of: {', '.join(VALID_OBJECTIVES)}"
            )
        if any(b < 1 for b in self.budgets):
            raise ValueError(f"Budgets must be >= 1, got {self.budgets}")
        if self.b1 and self.b1 < MIN_TRAINING_POINTS:
            raise ValueError(
                f"Invalid b1 {self.b1}. The model needs >= {MIN_TRAINING_POINTS} points"
            )
        if self.b2 < 0:
            raise ValueError(f"Invalid b2 {self.b2}. Must be >= 0")
        if self.n_repeats < 1:
            raise ValueError(f"Invalid n_repeats {self.n_repeats}. Must be >= 1")
        if self.noise_sd < 0:
            raise ValueError(f"Invalid noise_sd {self.noise_sd}. Must be >= 0")
        self.generation.validate()
        self.score.validate()
        self.fit.validate()

    def to_dict(self) -> Dict[str, Any]:
        doc = asdict(self)
        doc["score"] = self.score.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ExperimentSpec":
        """Create an ExperimentSpec from a parsed JSON document.

        Raises:
            ValueError: If any values fail validation or type conversion.
        """
        try:
            budgets = doc.get("budgets", [])
            if isinstance(budgets, str):
                budgets = parse_budgets(budgets)
            spec = cls(
                name=str(doc["name"]),
                objective=str(doc["objective"]),
                budgets=[int(b) for b in budgets],
                b1=int(doc.get("b1", 0)),
                b2=int(doc.get("b2", 0)),
                n_seed_points=int(doc.get("n_seed_points", 0)),
                n_repeats=int(doc.get("n_repeats", 1)),
                seed=int(doc.get("seed", DEFAULT_SEED)),
                noise_sd=float(doc.get("noise_sd", 0.0)),
                base_space=doc.get("base_space"),
                generation=GenerationSettings.from_dict(doc.get("generation", {})),
                score=ScoreConfig.from_dict(doc.get("score", {})),
                fit=FitConfig.from_dict(doc.get("fit", {})),
                extra=dict(doc.get("extra", {})),
            )
            spec.validate()
            return spec
        except KeyError as e:
            raise ValueError(f"Invalid experiment spec: missing field {e}")
        except (TypeError, ValueError) as e:
            raise ValueError(f"Invalid experiment spec: {e}")


def parse_budgets(value: str) -> List[int]:
    """Parse a budget list.

    Supports: ``1,5,25`` or ``start:stop:count-log`` (log-spaced, rounded,
    de-duplicated, ascending).

    Raises:
        ValueError: If the value is malformed or a budget is < 1.
    """
    value = value.strip()
    if not value:
        raise ValueError("Empty budget list")

    if ":" in value:
        parts = value.split(":")
        if len(parts) != 3 or not parts[2].endswith("-log"):
            raise ValueError(
                f"Invalid budget sweep '{value}'. Expected start:stop:count-log"
            )
        start, stop = int(parts[0]), int(parts[1])
        count = int(parts[2][: -len("-log")])
        if start < 1 or stop < start or count < 1:
            raise ValueError(f"Invalid budget sweep '{value}'")
        grid = np.geomspace(start, stop, count) if count > 1 else np.array([start])
        budgets = sorted({int(round(b)) for b in grid})
    else:
        budgets = [int(item) for item in value.split(",") if item.strip()]

    if any(b < 1 for b in budgets):
        raise ValueError(f"Budgets must be >= 1, got {budgets}")
    logger.debug(f"Parsed budgets '{value}': {budgets}")
    return budgets


def parse_rates(value: str) -> List[float]:
    """Parse reduction rates from ``0.1,0.5`` or ``start:stop:step``.

    Raises:
        ValueError: If the value is malformed or a rate is outside (0, 1].
    """
    value = value.strip()
    if ":" in value:
        parts = value.split(":")
        if len(parts) != 3:
            raise ValueError(f"Invalid rate range '{value}'. Expected start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"Invalid rate range '{value}'")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        rates = [round(start + k * step, 12) for k in range(count)]
    else:
        rates = [float(item) for item in value.split(",") if item.strip()]

    if not rates or any(not (0 < r <= 1) for r in rates):
        raise ValueError(f"Rates must lie in (0, 1], got {rates}")
    return rates

