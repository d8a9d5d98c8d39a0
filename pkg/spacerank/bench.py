"""Synthetic objectives, random-search baselines and closed-form oracles."""

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import norm
from tqdm import tqdm

from .constants import (
    BRANIN_A,
    BRANIN_B,
    BRANIN_BOUNDS,
    BRANIN_C,
    BRANIN_R,
    BRANIN_S,
    BRANIN_T,
    HARTMANN6_A,
    HARTMANN6_ALPHA,
    HARTMANN6_P,
    OBJECTIVE_BRANIN,
    OBJECTIVE_CONSTANT,
    OBJECTIVE_GRID_TABLE,
    OBJECTIVE_HARTMANN6,
    OBJECTIVE_SPHERE,
    VALID_OBJECTIVES,
)
from .core import (
    Budget,
    Dataset,
    Observation,
    OutOfDomainError,
    ParamDomain,
    SearchSpace,
    as_budget,
    derive_seed,
    make_rng,
    uniform_sample,
)
from .scoring import Objective, evaluate_objective

logger = logging.getLogger(__name__)

_HARTMANN_ALPHA = np.array(HARTMANN6_ALPHA)
_HARTMANN_A = np.array(HARTMANN6_A)
_HARTMANN_P = np.array(HARTMANN6_P)


def branin(x: np.ndarray) -> Union[float, np.ndarray]:
    """Branin function on points of shape (..., 2)."""
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    value = (
        BRANIN_A * (x2 - BRANIN_B * x1 ** 2 + BRANIN_C * x1 - BRANIN_R) ** 2
        + BRANIN_S * (1.0 - BRANIN_T) * np.cos(x1)
        + BRANIN_S
    )
    return float(value) if np.ndim(value) == 0 else value


def hartmann6(x: np.ndarray) -> Union[float, np.ndarray]:
    """Four-term Hartmann-6 function on points of shape (..., 6) in [0, 1]^6.

    Raises:
        OutOfDomainError: If a coordinate lies outside [0, 1].
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (6,):
        raise ValueError(f"Hartmann-6 needs 6 coordinates, got shape {x.shape}")
    outside = (x < 0.0) | (x > 1.0) | ~np.isfinite(x)
    if outside.any():
        dim = int(np.argwhere(outside)[0][-1]) + 1
        raise OutOfDomainError(
            f"Hartmann-6 input coordinate x{dim} is outside [0, 1]", dim=f"x{dim}"
        )
    inner = np.sum(_HARTMANN_A * (x[..., None, :] - _HARTMANN_P) ** 2, axis=-1)
    value = -np.sum(_HARTMANN_ALPHA * np.exp(-inner), axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def sphere(x: np.ndarray) -> Union[float, np.ndarray]:
    x = np.asarray(x, dtype=float)
    value = np.sum(x * x, axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def branin_space() -> SearchSpace:
    return SearchSpace(
        tuple(
            ParamDomain(f"x{i + 1}", lower=lo, upper=hi)
            for i, (lo, hi) in enumerate(BRANIN_BOUNDS)
        ),
        name="branin",
    )


def hartmann6_space() -> SearchSpace:
    return SearchSpace(
        tuple(ParamDomain(f"x{i + 1}", lower=0.0, upper=1.0) for i in range(6)),
        name="hartmann6",
    )


def sphere_space(d: int = 2, bound: float = 1.0) -> SearchSpace:
    return SearchSpace(
        tuple(ParamDomain(f"x{i + 1}", lower=-bound, upper=bound) for i in range(d)),
        name="sphere",
    )


class SyntheticObjective:
    """A closed-form objective on its canonical base space.

    Additive Gaussian noise is drawn from an internal stream guarded by a
    lock, so sequential use is reproducible under the seed.
    """

    vectorized = True

    def __init__(
        self,
        name: str,
        noise_sd: float = 0.0,
        seed: int = 0,
        d: int = 2,
        constant: float = 0.0,
    ):
        if name not in VALID_OBJECTIVES or name == OBJECTIVE_GRID_TABLE:
            raise ValueError(
                f"Invalid objective '{name}'. "
                f"Must be one of: {', '.join(VALID_OBJECTIVES)}"
            )
        if noise_sd < 0:
            raise ValueError(f"noise_sd must be >= 0, got {noise_sd}")
        self.name = name
        self.noise_sd = float(noise_sd)
        self.constant = float(constant)
        self._rng = make_rng(seed, "objective-noise")
        self._lock = threading.Lock()

        if name == OBJECTIVE_BRANIN:
            self.space, self._f = branin_space(), branin
        elif name == OBJECTIVE_HARTMANN6:
            self.space, self._f = hartmann6_space(), hartmann6
        elif name == OBJECTIVE_SPHERE:
            self.space, self._f = sphere_space(d), sphere
        elif name == OBJECTIVE_CONSTANT:
            self.space = sphere_space(d).with_name("constant")
            self._f = lambda x: np.full(np.shape(x)[:-1], self.constant)

    def noiseless(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self._f(np.asarray(x, dtype=float)), dtype=float)

    def __call__(self, x: np.ndarray) -> Union[float, np.ndarray]:
        value = self.noiseless(x)
        if self.noise_sd > 0:
            with self._lock:
                value = value + self.noise_sd * self._rng.standard_normal(value.shape)
        return float(value) if value.ndim == 0 else value

    def __repr__(self) -> str:
        return f"SyntheticObjective({self.name!r}, noise_sd={self.noise_sd})"


class GridTableObjective:
    """Piecewise-constant objective f(x) = values[floor(x)] on [0, N]."""

    vectorized = True
    name = OBJECTIVE_GRID_TABLE

    def __init__(self, values: Sequence[float]):
        self.values = np.asarray(values, dtype=float)
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("Grid-table objective needs a non-empty list of values")
        self.space = SearchSpace(
            (ParamDomain("x1", lower=0.0, upper=float(self.values.size)),),
            name="grid-table",
        )

    def __call__(self, x: np.ndarray) -> Union[float, np.ndarray]:
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.floor(x[..., 0]).astype(int), 0, self.values.size - 1)
        value = self.values[idx]
        return float(value) if np.ndim(value) == 0 else value


def make_objective(
    name: str, noise_sd: float = 0.0, seed: int = 0, **options: Any
) -> Objective:
    """Build a named benchmark objective.

    Options: ``d`` and ``constant`` for sphere/constant, ``values`` for
    grid-table.
    """
    if name == OBJECTIVE_GRID_TABLE:
        values = options.get("values")
        if values is None:
            values = make_rng(seed, "grid-table").standard_normal(20).round(6)
        return GridTableObjective(values)
    return SyntheticObjective(
        name,
        noise_sd=noise_sd,
        seed=seed,
        d=int(options.get("d", 2)),
        constant=float(options.get("constant", 0.0)),
    )


@dataclass(frozen=True)
class StudyLog:
    """Evaluations of one run in order, with the running best."""

    evals: Tuple[Observation, ...]
    phase_boundary: Optional[int] = None

    @classmethod
    def from_arrays(
        cls, x: np.ndarray, y: np.ndarray, phase_boundary: Optional[int] = None
    ) -> "StudyLog":
        return cls(
            tuple(Observation(tuple(xi), yi) for xi, yi in zip(np.atleast_2d(x), y)),
            phase_boundary,
        )

    def __len__(self) -> int:
        return len(self.evals)

    @property
    def y(self) -> np.ndarray:
        return np.array([o.y for o in self.evals], dtype=float)

    @property
    def best_curve(self) -> np.ndarray:
        return np.minimum.accumulate(self.y)

    @property
    def best(self) -> Observation:
        if not self.evals:
            raise ValueError("Empty study log has no best observation")
        return self.evals[int(np.argmin(self.y))]

    def then(self, other: "StudyLog") -> "StudyLog":
        """Concatenate, marking where this log ends."""
        return StudyLog(self.evals + other.evals, phase_boundary=len(self.evals))

    def to_dataset(self, space: SearchSpace) -> Dataset:
        return Dataset(space, self.evals)


def random_search(
    objective: Objective,
    space: SearchSpace,
    n: Union[Budget, int],
    seed: int,
) -> StudyLog:
    """Evaluate n uniform points in order.

    Raises:
        ObjectiveEvaluationError: If the objective fails.
    """
    budget = as_budget(n)
    x = uniform_sample(space, budget, seed)
    y = evaluate_objective(objective, x)
    return StudyLog.from_arrays(x, y)


@dataclass(frozen=True)
class CurveSummary:
    """Per-step mean and standard error of best-so-far curves."""

    mean: np.ndarray
    std_error: np.ndarray
    final_values: np.ndarray
    phase_boundary: Optional[int] = None

    @property
    def n_repeats(self) -> int:
        return self.final_values.size

    def to_rows(self, label: str = "") -> List[Dict[str, Any]]:
        return [
            {
                "label": label,
                "step": step + 1,
                "mean_best": float(m),
                "std_error": float(s),
                "n_repeats": self.n_repeats,
            }
            for step, (m, s) in enumerate(zip(self.mean, self.std_error))
        ]


CURVE_COLUMNS = ["label", "step", "mean_best", "std_error", "n_repeats"]


def aggregate_logs(logs: Sequence[StudyLog]) -> CurveSummary:
    """Align best-so-far curves and reduce them across repeats.

    Raises:
        ValueError: If the logs are empty or have different lengths.
    """
    if not logs:
        raise ValueError("No study logs to aggregate")
    lengths = sorted({len(log) for log in logs})
    if len(lengths) != 1:
        raise ValueError(f"Study logs have misaligned lengths {lengths}")
    curves = np.stack([log.best_curve for log in logs])
    n = curves.shape[0]
    std_error = (
        curves.std(axis=0, ddof=1) / math.sqrt(n)
        if n > 1
        else np.zeros(curves.shape[1])
    )
    return CurveSummary(
        mean=curves.mean(axis=0),
        std_error=std_error,
        final_values=curves[:, -1].copy(),
        phase_boundary=logs[0].phase_boundary,
    )


def replicate(
    run: Callable[[int], StudyLog],
    n_repeats: int,
    seed: int,
    max_workers: int = 1,
    verbose: bool = False,
) -> CurveSummary:
    """Run independent repeats with derived seeds and aggregate their curves.

    The aggregate does not depend on completion order or worker count.

    Raises:
        ValueError: If n_repeats < 2 or the logs are misaligned.
    """
    if n_repeats < 2:
        raise ValueError(f"n_repeats must be >= 2, got {n_repeats}")
    seeds = [derive_seed(seed, "repeat", i) for i in range(n_repeats)]
    logs: List[Optional[StudyLog]] = [None] * n_repeats
    lock = threading.Lock()

    if verbose:
        progress_bar = tqdm(total=n_repeats, desc="Repeats", unit="run")
    else:
        progress_bar = None

    def worker(i: int) -> None:
        log = run(seeds[i])
        with lock:
            logs[i] = log
            if progress_bar:
                progress_bar.update(1)

    try:
        if max_workers > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as executor:
                futures = [executor.submit(worker, i) for i in range(n_repeats)]
                for future in as_completed(futures):
                    future.result()
        else:
            for i in range(n_repeats):
                worker(i)
    finally:
        if progress_bar:
            progress_bar.close()

    logger.info(f"Completed {n_repeats} repeats")
    return aggregate_logs([log for log in logs if log is not None])


# Closed-form reference values for checking the Monte Carlo estimators.
def single_point_ei_oracle(mu: float, sigma: float, incumbent: float) -> float:
    """Closed-form expected improvement of one Gaussian draw below incumbent."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return max(0.0, incumbent - mu)
    z = (incumbent - mu) / sigma
    return float(sigma * norm.pdf(z) + (incumbent - mu) * norm.cdf(z))


def single_point_pi_oracle(mu: float, sigma: float, incumbent: float) -> float:
    """Probability that one Gaussian draw falls below incumbent."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return float(mu < incumbent)
    return float(norm.cdf((incumbent - mu) / sigma))


def grid_min_order_statistics_oracle(
    values: Sequence[float], b: Union[Budget, int], incumbent: float
) -> float:
    """Exact E[max(0, y+ - min)] over b with-replacement draws from values."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("values must be non-empty")
    budget = as_budget(b).b
    n = v.size
    k = np.arange(1, n + 1)
    weights = ((n - k + 1) / n) ** budget - ((n - k) / n) ** budget
    return float(np.sum(np.maximum(0.0, incumbent - v) * weights))
