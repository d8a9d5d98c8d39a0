"""Volume-constrained sub-space generation.

All geometry happens in transformed coordinates. A reduction rate rho
shrinks every free dimension by rho ** (1 / d_free) so the generated box
has rho times the base volume (before any clipping).
"""

import logging
from dataclasses import dataclass, replace
from typing import List, Sequence, Union

import numpy as np

from .core import (
    SearchSpace,
    check_points,
    derive_seed,
    make_rng,
    transform,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReductionRate:
    """Target ratio of generated volume to base volume."""

    rho: float

    def __post_init__(self):
        rho = float(self.rho)
        if not (0.0 < rho <= 1.0):
            raise ValueError(f"Reduction rate must be in (0, 1], got {self.rho}")
        object.__setattr__(self, "rho", rho)

    def per_dimension(self, d: int) -> float:
        return self.rho ** (1.0 / d)


def as_rate(rho: Union[ReductionRate, float]) -> ReductionRate:
    if isinstance(rho, ReductionRate):
        return rho
    return ReductionRate(rho)


def _free_count(base: SearchSpace) -> int:
    return int(np.count_nonzero(base.free_mask))


def random_subspace(
    base: SearchSpace, rho: Union[ReductionRate, float], seed: int
) -> SearchSpace:
    """Uniformly placed sub-box with exactly rho times the base volume."""
    rate = as_rate(rho)
    provenance = {"method": "random", "rate": rate.rho, "seed": seed}
    if rate.rho == 1.0:
        return replace(base, provenance=provenance)

    rng = make_rng(seed, "random-subspace")
    factor = rate.per_dimension(max(1, _free_count(base)))
    dims = []
    for dim in base.dims:
        if dim.is_fixed:
            dims.append(dim)
            continue
        length = factor * dim.t_length
        lower = dim.t_lower + rng.random() * (dim.t_length - length)
        upper = min(lower + length, dim.t_upper)
        dims.append(dim.with_transformed_bounds(lower, upper))
    return SearchSpace(tuple(dims), name=base.name, provenance=provenance)


def centered_subspace(
    base: SearchSpace,
    center: Sequence[float],
    rho: Union[ReductionRate, float],
) -> SearchSpace:
    """Sub-box of rho times the base volume centered on a point, clipped to base.

    Clipping is not compensated, so the volume may fall short of the target.

    Raises:
        OutOfDomainError: If center lies outside base.
    """
    rate = as_rate(rho)
    center = check_points(base, np.asarray(center, dtype=float).reshape(base.d))
    t_center = transform(base, center)
    factor = rate.per_dimension(max(1, _free_count(base)))

    dims = []
    for dim, tc in zip(base.dims, t_center):
        if dim.is_fixed:
            dims.append(dim)
            continue
        half = 0.5 * factor * dim.t_length
        lower = max(dim.t_lower, tc - half)
        upper = min(dim.t_upper, tc + half)
        dims.append(dim.with_transformed_bounds(lower, upper))

    provenance = {"method": "centered", "rate": rate.rho, "center": center.tolist()}
    return SearchSpace(tuple(dims), name=base.name, provenance=provenance)


def propose_search_spaces(
    base: SearchSpace,
    rates: Sequence[Union[ReductionRate, float]],
    per_rate: int,
    seed: int,
) -> List[SearchSpace]:
    """Random sub-spaces, per_rate for each rate, named ``rho=<rate>/<index>``."""
    if per_rate < 1:
        raise ValueError(f"per_rate must be >= 1, got {per_rate}")
    spaces = []
    for i, rho in enumerate(rates):
        rate = as_rate(rho)
        for k in range(per_rate):
            space = random_subspace(base, rate, derive_seed(seed, "propose", i, k))
            spaces.append(space.with_name(f"rho={rate.rho:g}/{k}"))
    logger.debug(f"Proposed {len(spaces)} search spaces from {len(rates)} rates")
    return spaces
