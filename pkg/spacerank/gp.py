"""Gaussian-process surrogate with an ARD Matern-5/2 kernel.

Inputs live in the unit cube of the training space and targets are
standardized to zero mean and unit variance. Positive hyperparameters are
optimized through a softplus reparameterization.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.optimize
from scipy.special import expit

from .config import FitConfig
from .constants import (
    INIT_AMPLITUDE,
    INIT_INV_LENGTHSCALE,
    INIT_NOISE_VAR,
    JITTER_FACTOR,
    JITTER_MAX,
    JITTER_START,
    MIN_TRAINING_POINTS,
    MODEL_DUMP_VERSION,
    NOISE_PRIOR_VAR,
    UNCONSTRAINED_BOUND,
)
from .core import Dataset, SearchSpace, SpaceRankError, make_rng, to_unit_cube

logger = logging.getLogger(__name__)

_SQRT5 = math.sqrt(5.0)
_LOG_2PI = math.log(2.0 * math.pi)
# Returned to the optimizer when the kernel cannot be factorized
_FAILED_OBJECTIVE = 1e25


class InsufficientDataError(SpaceRankError, ValueError):
    """Raised when a model is requested from fewer than two observations."""

    pass


class IllConditionedKernelError(SpaceRankError, ArithmeticError):
    """Raised when the training kernel cannot be factorized at maximum jitter."""

    pass


class DegenerateCovarianceError(SpaceRankError, ArithmeticError):
    """Raised when a posterior covariance cannot be factorized at maximum jitter."""

    def __init__(self, message: str, batch: Optional[int] = None):
        super().__init__(message)
        self.batch = batch


def softplus(u: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, u)


def inverse_softplus(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    small = np.minimum(p, 20.0)
    return np.where(p > 20.0, p, np.log(np.expm1(small)))


@dataclass(frozen=True, eq=False)
class KernelParams:
    """Positive-scale kernel hyperparameters."""

    amplitude: float
    inv_lengthscales: np.ndarray
    noise_var: float

    def __post_init__(self):
        amplitude = float(self.amplitude)
        noise_var = float(self.noise_var)
        inv = np.array(self.inv_lengthscales, dtype=float).ravel()
        values = np.concatenate([[amplitude, noise_var], inv])
        if inv.size == 0 or not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise ValueError(
                f"Kernel parameters must be finite and positive, got "
                f"amplitude={amplitude}, inv_lengthscales={inv}, noise_var={noise_var}"
            )
        inv.setflags(write=False)
        object.__setattr__(self, "amplitude", amplitude)
        object.__setattr__(self, "noise_var", noise_var)
        object.__setattr__(self, "inv_lengthscales", inv)

    @property
    def d(self) -> int:
        return self.inv_lengthscales.size

    @classmethod
    def default(cls, d: int, noise_var: float = INIT_NOISE_VAR) -> "KernelParams":
        return cls(INIT_AMPLITUDE, np.full(d, INIT_INV_LENGTHSCALE), noise_var)

    def to_unconstrained(self) -> np.ndarray:
        """Vector [amplitude, inv_lengthscales..., noise_var] before softplus."""
        positive = np.concatenate(
            [[self.amplitude], self.inv_lengthscales, [self.noise_var]]
        )
        return inverse_softplus(positive)

    @classmethod
    def from_unconstrained(cls, u: np.ndarray) -> "KernelParams":
        p = softplus(np.asarray(u, dtype=float))
        return cls(p[0], p[1:-1], p[-1])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "amplitude": self.amplitude,
            "inv_lengthscales": self.inv_lengthscales.tolist(),
            "noise_var": self.noise_var,
        }


def _matern52(r: np.ndarray) -> np.ndarray:
    s = _SQRT5 * r
    return (1.0 + s + s * s / 3.0) * np.exp(-s)


def kernel_matrix(params: KernelParams, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross-covariance between point sets of shape (..., m, d) and (..., n, d)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = (a[..., :, None, :] - b[..., None, :, :]) * params.inv_lengthscales
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    return params.amplitude ** 2 * _matern52(r)


def kernel_eval(params: KernelParams, a: np.ndarray, b: np.ndarray) -> float:
    """Kernel value between two unit-cube vectors."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape or a.size != params.d:
        raise ValueError(
            f"Kernel inputs must both have length {params.d}, got {a.size} and {b.size}"
        )
    return float(kernel_matrix(params, a[None, :], b[None, :])[0, 0])


def gram(params: KernelParams, x: np.ndarray) -> np.ndarray:
    """Training covariance K + noise_var * I."""
    x = np.asarray(x, dtype=float)
    return kernel_matrix(params, x, x) + params.noise_var * np.eye(len(x))


def jittered_cholesky(
    matrix: np.ndarray,
    scale: float,
    jitter: Optional[float] = None,
) -> Tuple[np.ndarray, float]:
    """Lower Cholesky factor of matrix + jitter * I, escalating jitter as needed.

    The ladder starts at JITTER_START * scale (or ``jitter``) and grows by
    JITTER_FACTOR up to JITTER_MAX * scale.

    Raises:
        numpy.linalg.LinAlgError: If the last rung still fails.
    """
    eye = np.eye(matrix.shape[0])
    current = JITTER_START * scale if jitter is None else float(jitter)
    ceiling = JITTER_MAX * scale
    while True:
        try:
            chol = scipy.linalg.cholesky(matrix + current * eye, lower=True)
            return chol, current
        except (np.linalg.LinAlgError, ValueError):
            if current >= ceiling * (1.0 - 1e-12):
                raise np.linalg.LinAlgError(
                    f"Matrix not positive definite with jitter {current:.3g}"
                )
            logger.debug(f"Cholesky failed with jitter {current:.3g}; escalating")
            current = min(current * JITTER_FACTOR, ceiling)


def _log_prior(params: KernelParams, u_noise: float) -> Tuple[float, np.ndarray]:
    """Log-prior and its gradient w.r.t. positive amplitude/inv_lengthscales
    and the unconstrained noise term."""
    positive = np.concatenate([[params.amplitude], params.inv_lengthscales])
    logs = np.log(positive)
    value = float(np.sum(-logs - 0.5 * logs ** 2 - 0.5 * _LOG_2PI))
    grad_positive = -(1.0 + logs) / positive
    value += -0.5 * u_noise ** 2 / NOISE_PRIOR_VAR - 0.5 * math.log(
        2.0 * math.pi * NOISE_PRIOR_VAR
    )
    grad_u_noise = -u_noise / NOISE_PRIOR_VAR
    return value, np.concatenate([grad_positive, [grad_u_noise]])


def log_marginal_likelihood(
    params: KernelParams,
    x: np.ndarray,
    y: np.ndarray,
    with_prior: bool = True,
    jitter: Optional[float] = None,
) -> Tuple[float, np.ndarray]:
    """Log marginal likelihood of standardized targets (plus log-priors).

    Args:
        params: Kernel hyperparameters.
        x: Unit-cube training inputs, shape (n, d).
        y: Standardized targets, shape (n,).
        with_prior: Add the hyperprior log-densities.
        jitter: Starting jitter for the Cholesky ladder.

    Returns:
        Tuple of (value, gradient) where the gradient is taken w.r.t. the
        unconstrained vector [amplitude, inv_lengthscales..., noise_var].

    Raises:
        IllConditionedKernelError: If the kernel cannot be factorized.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    if n < 1 or x.shape != (n, params.d):
        raise ValueError(f"Expected x of shape ({n}, {params.d}), got {x.shape}")

    amp = params.amplitude
    w = params.inv_lengthscales
    diff = x[:, None, :] - x[None, :, :]
    sq = diff * diff
    r = np.sqrt(np.sum(sq * w * w, axis=-1))
    decay = np.exp(-_SQRT5 * r)
    shape = (1.0 + _SQRT5 * r + 5.0 * r * r / 3.0) * decay
    k_y = amp ** 2 * shape + params.noise_var * np.eye(n)

    try:
        chol, _ = jittered_cholesky(k_y, amp ** 2, jitter)
    except np.linalg.LinAlgError as e:
        raise IllConditionedKernelError(f"Training kernel is ill-conditioned: {e}")

    alpha = scipy.linalg.cho_solve((chol, True), y)
    value = (
        -0.5 * float(y @ alpha)
        - float(np.sum(np.log(np.diag(chol))))
        - 0.5 * n * _LOG_2PI
    )

    k_inv = scipy.linalg.cho_solve((chol, True), np.eye(n))
    weights = np.outer(alpha, alpha) - k_inv
    grad_amp = 0.5 * np.sum(weights * 2.0 * amp * shape)
    common = weights * (amp ** 2 * (-5.0 / 3.0) * (1.0 + _SQRT5 * r) * decay)
    grad_w = 0.5 * np.einsum("jk,jki->i", common, sq) * w
    grad_noise = 0.5 * np.trace(weights)
    grad_positive = np.concatenate([[grad_amp], grad_w, [grad_noise]])

    u = params.to_unconstrained()
    grad = grad_positive * expit(u)

    if with_prior:
        prior, prior_grad = _log_prior(params, float(u[-1]))
        value += prior
        grad[:-1] += prior_grad[:-1] * expit(u[:-1])
        grad[-1] += prior_grad[-1]

    return value, grad


@dataclass(frozen=True, eq=False)
class GpModel:
    """A conditioned GP; immutable and safe to share across threads."""

    params: KernelParams
    space: SearchSpace
    train_x: np.ndarray
    train_y_standardized: np.ndarray
    y_mean: float
    y_std: float
    chol: np.ndarray
    alpha: np.ndarray
    chol_inv: np.ndarray = field(repr=False)
    jitter: float = 0.0
    degenerate_targets: bool = False
    log_likelihood: float = float("nan")

    def __post_init__(self):
        for name in ("train_x", "train_y_standardized", "chol", "alpha", "chol_inv"):
            getattr(self, name).setflags(write=False)

    @property
    def n(self) -> int:
        return self.train_x.shape[0]

    @property
    def d(self) -> int:
        return self.train_x.shape[1]

    @property
    def prior_var(self) -> float:
        return self.params.amplitude ** 2

    def standardize(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_std

    def predict(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Marginal latent mean and variance at natural-units points, in y units."""
        unit = to_unit_cube(self.space, np.atleast_2d(x))
        ks = kernel_matrix(self.params, unit, self.train_x)
        v = ks @ self.chol_inv.T
        mean = ks @ self.alpha
        var = np.maximum(self.prior_var - np.sum(v * v, axis=-1), 0.0)
        return self.y_mean + self.y_std * mean, self.y_std ** 2 * var

    def to_dict(self) -> Dict[str, Any]:
        """Debugging dump; not a stable format."""
        return {
            "version": MODEL_DUMP_VERSION,
            "kernel": self.params.to_dict(),
            "y_mean": self.y_mean,
            "y_std": self.y_std,
            "jitter": self.jitter,
            "degenerate_targets": self.degenerate_targets,
            "log_likelihood": self.log_likelihood,
            "space": self.space.to_dict(),
            "train_x": self.train_x.tolist(),
            "train_y_standardized": self.train_y_standardized.tolist(),
        }


def _condition(
    params: KernelParams,
    space: SearchSpace,
    x: np.ndarray,
    y: np.ndarray,
    y_mean: float,
    y_std: float,
    degenerate: bool = False,
    log_likelihood: float = float("nan"),
) -> GpModel:
    try:
        chol, jitter = jittered_cholesky(gram(params, x), params.amplitude ** 2)
    except np.linalg.LinAlgError as e:
        raise IllConditionedKernelError(f"Training kernel is ill-conditioned: {e}")
    n = len(y)
    return GpModel(
        params=params,
        space=space,
        train_x=np.array(x, dtype=float),
        train_y_standardized=np.array(y, dtype=float),
        y_mean=float(y_mean),
        y_std=float(y_std),
        chol=chol,
        alpha=scipy.linalg.cho_solve((chol, True), y),
        chol_inv=scipy.linalg.solve_triangular(chol, np.eye(n), lower=True),
        jitter=jitter,
        degenerate_targets=degenerate,
        log_likelihood=log_likelihood,
    )


def _standardize(data: Dataset) -> Tuple[np.ndarray, float, float, bool]:
    y = data.y
    y_mean = float(np.mean(y))
    y_std = float(np.std(y))
    degenerate = not y_std > 1e-12 * max(1.0, abs(y_mean))
    if degenerate:
        logger.warning(
            f"Targets of {data.n} observations have zero variance; using y_std = 1"
        )
        y_std = 1.0
    return (y - y_mean) / y_std, y_mean, y_std, degenerate


def build_model(data: Dataset, params: KernelParams) -> GpModel:
    """Condition a GP on data at fixed hyperparameters (no fitting).

    Raises:
        InsufficientDataError: If data is empty.
        IllConditionedKernelError: If the kernel cannot be factorized.
    """
    if data.n < 1:
        raise InsufficientDataError("Cannot condition a GP on an empty dataset")
    ys, y_mean, y_std, degenerate = _standardize(data)
    x = to_unit_cube(data.space, data.x)
    return _condition(params, data.space, x, ys, y_mean, y_std, degenerate)


def fit(data: Dataset, seed: int = 0, config: Optional[FitConfig] = None) -> GpModel:
    """Fit kernel hyperparameters by maximizing the log posterior with L-BFGS-B.

    Args:
        data: Observations; inputs are mapped to the unit cube of data.space.
        seed: Seed for restart initializations (unused without restarts).
        config: Optimizer settings.

    Returns:
        GpModel at the best iterate seen.

    Raises:
        InsufficientDataError: If fewer than two observations are given.
        IllConditionedKernelError: If no iterate could be evaluated.
    """
    config = config or FitConfig()
    config.validate()
    if data.n < MIN_TRAINING_POINTS:
        raise InsufficientDataError(
            f"GP fit needs at least {MIN_TRAINING_POINTS} observations, got {data.n}"
        )

    ys, y_mean, y_std, degenerate = _standardize(data)
    x = to_unit_cube(data.space, data.x)
    d = data.space.d

    fixed_noise = config.fixed_noise_var is not None
    initial = KernelParams.default(
        d, config.fixed_noise_var if fixed_noise else INIT_NOISE_VAR
    ).to_unconstrained()
    free = np.arange(d + 2) if not fixed_noise else np.arange(d + 1)

    starts = [initial]
    rng = make_rng(seed, "fit-restarts")
    for _ in range(config.n_restarts):
        positive = np.exp(rng.standard_normal(d + 1))
        start = initial.copy()
        start[:-1] = inverse_softplus(positive)
        if not fixed_noise:
            start[-1] = rng.normal(0.0, math.sqrt(NOISE_PRIOR_VAR))
        starts.append(np.clip(start, -UNCONSTRAINED_BOUND, UNCONSTRAINED_BOUND))

    best: Dict[str, Any] = {"value": -np.inf, "u": None}

    def objective(free_u: np.ndarray, base_u: np.ndarray) -> Tuple[float, np.ndarray]:
        u = base_u.copy()
        u[free] = free_u
        try:
            value, grad = log_marginal_likelihood(
                KernelParams.from_unconstrained(u), x, ys
            )
        except (IllConditionedKernelError, ValueError):
            return _FAILED_OBJECTIVE, np.zeros(free.size)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            return _FAILED_OBJECTIVE, np.zeros(free.size)
        if value > best["value"]:
            best["value"] = value
            best["u"] = u.copy()
        return -value, -grad[free]

    bounds = [(-UNCONSTRAINED_BOUND, UNCONSTRAINED_BOUND)] * free.size
    for i, start in enumerate(starts):
        result = scipy.optimize.minimize(
            objective,
            start[free],
            args=(start,),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={
                "maxiter": config.max_iterations,
                "maxcor": config.memory,
                "gtol": config.gradient_tolerance,
                "ftol": 1e-15,
            },
        )
        logger.debug(
            f"L-BFGS-B start {i}: {result.nit} iterations, "
            f"status {result.status} ({result.message})"
        )

    if best["u"] is None:
        raise IllConditionedKernelError(
            "No hyperparameter setting produced a factorizable kernel"
        )

    params = KernelParams.from_unconstrained(best["u"])
    model = _condition(
        params, data.space, x, ys, y_mean, y_std, degenerate, float(best["value"])
    )
    logger.info(
        f"Fitted GP on {data.n} points: amplitude={params.amplitude:.4g}, "
        f"noise_var={params.noise_var:.4g}, log-posterior={best['value']:.4f}"
    )
    return model


@dataclass(frozen=True, eq=False)
class JointPosterior:
    """Joint latent posterior over a batch, in standardized units."""

    mean: np.ndarray
    cov: np.ndarray
    prior_var: float


def posterior_moments(
    model: GpModel, batch_unit: np.ndarray, include_noise: bool
) -> Tuple[np.ndarray, np.ndarray]:
    ks = kernel_matrix(model.params, batch_unit, model.train_x)
    kss = kernel_matrix(model.params, batch_unit, batch_unit)
    mean = ks @ model.alpha
    v = ks @ model.chol_inv.T
    cov = kss - v @ np.swapaxes(v, -1, -2)
    cov = 0.5 * (cov + np.swapaxes(cov, -1, -2))
    if include_noise:
        cov = cov + model.params.noise_var * np.eye(batch_unit.shape[-2])
    return mean, cov


def joint_posterior(
    model: GpModel, batch_unit: np.ndarray, include_noise: bool = False
) -> JointPosterior:
    """Joint posterior at m unit-cube points (latent f unless include_noise)."""
    batch_unit = np.atleast_2d(np.asarray(batch_unit, dtype=float))
    if batch_unit.shape[-1] != model.d:
        raise ValueError(
            f"Batch points must have {model.d} coordinates, got {batch_unit.shape}"
        )
    mean, cov = posterior_moments(model, batch_unit, include_noise)
    return JointPosterior(mean=mean, cov=cov, prior_var=model.prior_var)


def posterior_cholesky(
    cov: np.ndarray, prior_var: float, batch: Optional[int] = None
) -> np.ndarray:
    """Jittered Cholesky factor of a posterior covariance.

    Raises:
        DegenerateCovarianceError: If the covariance cannot be factorized.
    """
    try:
        chol, _ = jittered_cholesky(cov, prior_var)
    except np.linalg.LinAlgError as e:
        where = f" for batch {batch}" if batch is not None else ""
        raise DegenerateCovarianceError(
            f"Posterior covariance of size {cov.shape[0]}{where} is degenerate: {e}",
            batch=batch,
        )
    return chol


def stacked_posterior_cholesky(
    cov: np.ndarray, prior_var: float, first_batch: int = 0
) -> np.ndarray:
    """Cholesky factors of a stack of covariances, shape (k, m, m)."""
    eye = np.eye(cov.shape[-1])
    try:
        return np.linalg.cholesky(cov + JITTER_START * prior_var * eye)
    except np.linalg.LinAlgError:
        return np.stack(
            [
                posterior_cholesky(c, prior_var, batch=first_batch + i)
                for i, c in enumerate(cov)
            ]
        )


def sample_posterior(post: JointPosterior, n_samples: int, seed: int) -> np.ndarray:
    """Draw joint samples, shape (n_samples, m), in standardized units.

    Raises:
        DegenerateCovarianceError: If the covariance cannot be factorized.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    chol = posterior_cholesky(post.cov, post.prior_var)
    z = make_rng(seed).standard_normal((post.mean.size, n_samples))
    return (post.mean[:, None] + chol @ z).T
