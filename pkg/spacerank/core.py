"""Domain types shared by every spacerank module.

Search spaces are axis-aligned boxes. Geometry (volumes, sampling, sub-space
generation) lives in transformed coordinates: the identity for ``linear``
dimensions and ``log10`` for ``log10`` dimensions. Observations are kept in
natural units.
"""

import hashlib
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .constants import SCALE_LINEAR, SCALE_LOG10, SPACE_FORMAT_VERSION

logger = logging.getLogger(__name__)

_SEED_LIMIT = 2 ** 64
# Relative slack, in transformed units, for containment checks
_CONTAINMENT_TOL = 1e-9


class SpaceRankError(Exception):
    """Base class for spacerank errors."""
    pass


class SpaceDefinitionError(SpaceRankError, ValueError):
    """Raised for an invalid dimension or search space definition."""
    pass


class OutOfDomainError(SpaceRankError, ValueError):
    """Raised when a coordinate lies outside its dimension's bounds."""

    def __init__(self, message: str, dim: Optional[str] = None):
        super().__init__(message)
        self.dim = dim


class Scale(str, Enum):
    """Per-dimension transform applied before any geometry."""

    LINEAR = SCALE_LINEAR
    LOG10 = SCALE_LOG10

    def forward(self, values):
        """Map natural units to transformed units."""
        if self is Scale.LOG10:
            return np.log10(values)
        return values

    def inverse(self, values):
        """Map transformed units back to natural units."""
        if self is Scale.LOG10:
            return np.power(10.0, values)
        return values


def check_seed(seed: int) -> int:
    """Validate a 64-bit unsigned seed.

    Raises:
        ValueError: If seed is not an integer in [0, 2**64).
    """
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ValueError(f"Seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not (0 <= seed < _SEED_LIMIT):
        raise ValueError(f"Seed must be in [0, 2**64), got {seed}")
    return seed


def _key_to_int(key: Union[int, str]) -> int:
    if isinstance(key, (int, np.integer)) and not isinstance(key, bool):
        if key < 0:
            raise ValueError(f"Seed keys must be non-negative, got {key}")
        return int(key)
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(seed: int, *keys: Union[int, str]) -> np.random.Generator:
    """Create a generator for the stream identified by (seed, keys)."""
    sequence = np.random.SeedSequence(
        entropy=check_seed(seed),
        spawn_key=tuple(_key_to_int(k) for k in keys),
    )
    return np.random.default_rng(sequence)


def derive_seed(seed: int, *keys: Union[int, str]) -> int:
    """Derive a child 64-bit seed from a master seed and a key path."""
    sequence = np.random.SeedSequence(
        entropy=check_seed(seed),
        spawn_key=tuple(_key_to_int(k) for k in keys),
    )
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class Budget:
    """Number of future objective evaluations a score is conditioned on."""

    b: int

    def __post_init__(self):
        if isinstance(self.b, bool) or not isinstance(self.b, (int, np.integer)):
            raise ValueError(f"Budget must be an integer, got {self.b!r}")
        if self.b < 1:
            raise ValueError(f"Budget must be >= 1, got {self.b}")
        object.__setattr__(self, "b", int(self.b))

    def __int__(self) -> int:
        return self.b


def as_budget(budget: Union["Budget", int]) -> Budget:
    """Coerce an int or Budget into a Budget."""
    if isinstance(budget, Budget):
        return budget
    return Budget(budget)


@dataclass(frozen=True)
class ParamDomain:
    """One named dimension of a search space.

    ``lower``/``upper`` are natural units. ``lower == upper`` marks a fixed
    coordinate. ``grid`` is an optional ascending quantization set that only
    affects sampling.
    """

    name: str
    scale: Scale = Scale.LINEAR
    lower: float = 0.0
    upper: float = 1.0
    grid: Optional[Tuple[float, ...]] = None
    t_bounds: Optional[Tuple[float, float]] = field(
        default=None, compare=False, repr=False
    )

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise SpaceDefinitionError("Dimension name must be a non-empty string")
        try:
            scale = Scale(self.scale)
        except ValueError:
            raise SpaceDefinitionError(
                f"Invalid scale '{self.scale}' for dimension '{self.name}'. "
                f"Must be one of: {', '.join(s.value for s in Scale)}"
            )
        lower, upper = float(self.lower), float(self.upper)
        if not (math.isfinite(lower) and math.isfinite(upper)):
            raise SpaceDefinitionError(f"Bounds of '{self.name}' must be finite")
        if lower > upper:
            raise SpaceDefinitionError(
                f"Dimension '{self.name}' has lower {lower} > upper {upper}"
            )
        if scale is Scale.LOG10 and lower <= 0:
            raise SpaceDefinitionError(
                f"Dimension '{self.name}' is log10-scaled and needs lower > 0, "
                f"got {lower}"
            )
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

        if self.t_bounds is None:
            t_bounds = (float(scale.forward(lower)), float(scale.forward(upper)))
        else:
            t_bounds = (float(self.t_bounds[0]), float(self.t_bounds[1]))
        if lower == upper:
            t_bounds = (t_bounds[0], t_bounds[0])
        object.__setattr__(self, "t_bounds", t_bounds)

        if self.grid is not None:
            grid = tuple(float(g) for g in self.grid)
            if not grid:
                raise SpaceDefinitionError(f"Grid of '{self.name}' is empty")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise SpaceDefinitionError(
                    f"Grid of '{self.name}' must be strictly ascending"
                )
            outside = [g for g in grid if not self.contains(g)]
            if outside:
                raise SpaceDefinitionError(
                    f"Grid values {outside} of '{self.name}' lie outside "
                    f"[{lower}, {upper}]"
                )
            object.__setattr__(self, "grid", grid)

    @classmethod
    def from_transformed(
        cls,
        name: str,
        scale: Union[Scale, str],
        t_lower: float,
        t_upper: float,
        grid: Optional[Sequence[float]] = None,
    ) -> "ParamDomain":
        """Build a domain from bounds given in transformed units."""
        scale = Scale(scale)
        t_lower, t_upper = float(t_lower), float(t_upper)
        return cls(
            name=name,
            scale=scale,
            lower=float(scale.inverse(t_lower)),
            upper=float(scale.inverse(t_upper)),
            grid=tuple(grid) if grid is not None else None,
            t_bounds=(t_lower, t_upper),
        )

    @property
    def t_lower(self) -> float:
        return self.t_bounds[0]

    @property
    def t_upper(self) -> float:
        return self.t_bounds[1]

    @property
    def t_length(self) -> float:
        return self.t_bounds[1] - self.t_bounds[0]

    @property
    def is_fixed(self) -> bool:
        return self.t_length == 0.0

    def _tolerance(self) -> float:
        return _CONTAINMENT_TOL * max(1.0, abs(self.t_lower), abs(self.t_upper))

    def contains(self, value: float) -> bool:
        """Check whether a natural-units value lies inside the interval."""
        value = float(value)
        if not math.isfinite(value):
            return False
        if self.scale is Scale.LOG10 and value <= 0:
            return False
        t = float(self.scale.forward(value))
        tol = self._tolerance()
        return self.t_lower - tol <= t <= self.t_upper + tol

    def snap(self, values: np.ndarray) -> np.ndarray:
        """Snap natural-units values to the nearest grid element."""
        if self.grid is None:
            return values
        grid = np.asarray(self.grid)
        if grid.size == 1:
            return np.full_like(values, grid[0], dtype=float)
        idx = np.clip(np.searchsorted(grid, values), 1, grid.size - 1)
        left, right = grid[idx - 1], grid[idx]
        return np.where(values - left <= right - values, left, right)

    def with_transformed_bounds(self, t_lower: float, t_upper: float) -> "ParamDomain":
        """Return a copy on a new transformed interval, filtering the grid."""
        grid = None
        if self.grid is not None:
            bounds = ParamDomain.from_transformed(
                self.name, self.scale, t_lower, t_upper
            )
            kept = [g for g in self.grid if bounds.contains(g)]
            if kept:
                grid = kept
            else:
                logger.warning(
                    f"No grid value of '{self.name}' lies in "
                    f"[{t_lower:.6g}, {t_upper:.6g}]; sampling it continuously"
                )
        return ParamDomain.from_transformed(
            self.name, self.scale, t_lower, t_upper, grid
        )

    def fixed_at(self, value: float) -> "ParamDomain":
        """Return a zero-width copy pinned to value.

        Raises:
            OutOfDomainError: If value lies outside the interval.
        """
        if not self.contains(value):
            raise OutOfDomainError(
                f"Fixed value {value} for '{self.name}' is outside "
                f"[{self.lower}, {self.upper}]",
                dim=self.name,
            )
        t = float(self.scale.forward(float(value)))
        return ParamDomain(
            name=self.name,
            scale=self.scale,
            lower=float(value),
            upper=float(value),
            t_bounds=(t, t),
        )

    def to_dict(self) -> Dict[str, Any]:
        doc: Dict[str, Any] = {
            "name": self.name,
            "scale": self.scale.value,
            "min": self.t_lower,
            "max": self.t_upper,
        }
        if self.grid is not None:
            doc["grid"] = list(self.grid)
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ParamDomain":
        """Parse a dimension document whose min/max are in scaled units.

        Raises:
            SpaceDefinitionError: If a field is missing or malformed.
        """
        try:
            name = doc["name"]
            t_lower = float(doc["min"])
            t_upper = float(doc["max"])
        except KeyError as e:
            raise SpaceDefinitionError(f"Dimension is missing field {e}")
        except (TypeError, ValueError) as e:
            raise SpaceDefinitionError(f"Dimension bounds must be numbers: {e}")
        return cls.from_transformed(
            name,
            doc.get("scale", SCALE_LINEAR),
            t_lower,
            t_upper,
            doc.get("grid"),
        )


@dataclass(frozen=True)
class SearchSpace:
    """Ordered hyperrectangle of parameter domains."""

    dims: Tuple[ParamDomain, ...]
    name: str = ""
    provenance: Optional[Mapping[str, Any]] = field(
        default=None, compare=False, repr=False
    )

    def __post_init__(self):
        dims = tuple(self.dims)
        if not dims:
            raise SpaceDefinitionError("A search space needs at least one dimension")
        names = [d.name for d in dims]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise SpaceDefinitionError(f"Duplicate dimension names: {duplicates}")
        object.__setattr__(self, "dims", dims)

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def names(self) -> List[str]:
        return [dim.name for dim in self.dims]

    @property
    def t_lower(self) -> np.ndarray:
        return np.array([dim.t_lower for dim in self.dims])

    @property
    def t_upper(self) -> np.ndarray:
        return np.array([dim.t_upper for dim in self.dims])

    @property
    def t_length(self) -> np.ndarray:
        return np.array([dim.t_length for dim in self.dims])

    @property
    def free_mask(self) -> np.ndarray:
        return np.array([not dim.is_fixed for dim in self.dims])

    def index(self, name: str) -> int:
        """Position of a dimension.

        Raises:
            KeyError: If no dimension has that name.
        """
        for i, dim in enumerate(self.dims):
            if dim.name == name:
                return i
        raise KeyError(f"Unknown dimension '{name}'. Known: {', '.join(self.names)}")

    def dim(self, name: str) -> ParamDomain:
        return self.dims[self.index(name)]

    def contains(self, x: Sequence[float]) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            return False
        return all(dim.contains(v) for dim, v in zip(self.dims, x))

    def is_subset_of(self, other: "SearchSpace") -> bool:
        """Per-dimension interval inclusion (dimension names must match)."""
        if self.names != other.names:
            return False
        return all(
            theirs.contains(mine.lower) and theirs.contains(mine.upper)
            for mine, theirs in zip(self.dims, other.dims)
        )

    def fix(self, name: str, value: float) -> "SearchSpace":
        """Copy of this space with one dimension pinned to value."""
        i = self.index(name)
        dims = list(self.dims)
        dims[i] = dims[i].fixed_at(value)
        return SearchSpace(tuple(dims), name=f"{name}={value:g}")

    def product(self, other: "SearchSpace") -> "SearchSpace":
        """Cartesian product; dimension names must stay unique."""
        return SearchSpace(self.dims + other.dims, name=f"{self.name}*{other.name}")

    def with_name(self, name: str) -> "SearchSpace":
        return replace(self, name=name)

    def to_dict(self) -> Dict[str, Any]:
        doc: Dict[str, Any] = {"dims": [dim.to_dict() for dim in self.dims]}
        if self.name:
            doc["name"] = self.name
        if self.provenance is not None:
            doc["provenance"] = dict(self.provenance)
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any], name: str = "") -> "SearchSpace":
        """Parse a search-space JSON document.

        Raises:
            SpaceDefinitionError: If the document is malformed.
        """
        if not isinstance(doc, Mapping) or "dims" not in doc:
            raise SpaceDefinitionError("Search space document needs a 'dims' list")
        version = doc.get("version", SPACE_FORMAT_VERSION)
        if version != SPACE_FORMAT_VERSION:
            raise SpaceDefinitionError(f"Unsupported space format version {version}")
        dims = tuple(ParamDomain.from_dict(d) for d in doc["dims"])
        return cls(
            dims,
            name=str(doc.get("name", name)),
            provenance=doc.get("provenance"),
        )


def check_points(space: SearchSpace, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (space.d,):
        raise ValueError(
            f"Points must have {space.d} coordinates, got shape {x.shape}"
        )
    for i, dim in enumerate(space.dims):
        column = x[..., i]
        bad = ~np.isfinite(column)
        if dim.scale is Scale.LOG10:
            bad |= column <= 0
        if not bad.any():
            t = dim.scale.forward(column)
            tol = dim._tolerance()
            bad = (t < dim.t_lower - tol) | (t > dim.t_upper + tol)
        if np.any(bad):
            offender = column[bad].flat[0]
            raise OutOfDomainError(
                f"Coordinate {offender} of dimension '{dim.name}' is outside "
                f"[{dim.lower}, {dim.upper}]",
                dim=dim.name,
            )
    return x


def transform(space: SearchSpace, x: np.ndarray) -> np.ndarray:
    """Natural units to transformed units, column by column."""
    x = np.asarray(x, dtype=float)
    t = np.empty_like(x)
    for i, dim in enumerate(space.dims):
        t[..., i] = dim.scale.forward(x[..., i])
    return t


def untransform(space: SearchSpace, t: np.ndarray) -> np.ndarray:
    """Transformed units to natural units, column by column."""
    t = np.asarray(t, dtype=float)
    x = np.empty_like(t)
    for i, dim in enumerate(space.dims):
        x[..., i] = dim.lower if dim.is_fixed else dim.scale.inverse(t[..., i])
    return x


def to_unit_cube(space: SearchSpace, x: np.ndarray) -> np.ndarray:
    """Map natural-units points to [0, 1]^d; fixed dimensions map to 0.

    Raises:
        OutOfDomainError: If a coordinate lies outside its dimension.
    """
    x = check_points(space, x)
    t = transform(space, x)
    length = space.t_length
    safe = np.where(length > 0, length, 1.0)
    u = np.where(length > 0, (t - space.t_lower) / safe, 0.0)
    return np.clip(u, 0.0, 1.0)


def from_unit_cube(space: SearchSpace, u: np.ndarray) -> np.ndarray:
    """Inverse of to_unit_cube."""
    u = np.asarray(u, dtype=float)
    return untransform(space, space.t_lower + u * space.t_length)


def draw_uniform(
    space: SearchSpace,
    rng: np.random.Generator,
    size: Tuple[int, ...],
) -> np.ndarray:
    """Uniform natural-units points of shape ``size + (d,)``.

    Uniforms are drawn in C order with the point axis innermost, so for a
    fixed stream the leading-axis prefix of a larger draw equals a smaller
    draw.
    """
    u = rng.random(tuple(size) + (space.d,))
    x = from_unit_cube(space, u)
    for i, dim in enumerate(space.dims):
        if dim.grid is not None and not dim.is_fixed:
            x[..., i] = dim.snap(x[..., i])
    return x


def uniform_sample(space: SearchSpace, b: Union[Budget, int], seed: int) -> np.ndarray:
    """Draw b i.i.d. uniform points (natural units) from space."""
    budget = as_budget(b)
    return draw_uniform(space, make_rng(seed), (budget.b,))


def volume(space: SearchSpace) -> float:
    """Product of transformed interval lengths over the free dimensions."""
    return float(np.prod(space.t_length[space.free_mask]))


@dataclass(frozen=True)
class Observation:
    """A single evaluated point (natural units, lower is better)."""

    x: Tuple[float, ...]
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in np.ravel(self.x)))
        y = float(self.y)
        if not math.isfinite(y):
            raise ValueError(f"Objective value must be finite, got {self.y}")
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class Dataset:
    """Observations together with the space they were drawn from."""

    space: SearchSpace
    obs: Tuple[Observation, ...] = ()

    def __post_init__(self):
        obs = tuple(self.obs)
        if obs:
            check_points(self.space, np.array([o.x for o in obs]))
        object.__setattr__(self, "obs", obs)

    @classmethod
    def from_arrays(
        cls,
        space: SearchSpace,
        x: np.ndarray,
        y: Iterable[float],
        negate: bool = False,
    ) -> "Dataset":
        """Build a dataset; negate flips maximize-style objectives."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.asarray(list(y), dtype=float)
        if len(x) != len(y):
            raise ValueError(f"Got {len(x)} points but {len(y)} objective values")
        if negate:
            y = -y
        return cls(space, tuple(Observation(tuple(xi), yi) for xi, yi in zip(x, y)))

    @property
    def n(self) -> int:
        return len(self.obs)

    @property
    def x(self) -> np.ndarray:
        x = np.array([o.x for o in self.obs], dtype=float)
        return x.reshape(self.n, self.space.d)

    @property
    def y(self) -> np.ndarray:
        return np.array([o.y for o in self.obs], dtype=float)

    @property
    def best(self) -> Observation:
        """First observation attaining the minimum objective.

        Raises:
            ValueError: If the dataset is empty.
        """
        if not self.obs:
            raise ValueError("Empty dataset has no incumbent")
        return self.obs[int(np.argmin(self.y))]

    @property
    def incumbent(self) -> float:
        return self.best.y

    def restrict(self, space: SearchSpace) -> "Dataset":
        """Observations lying inside space, re-homed to that space."""
        return Dataset(space, tuple(o for o in self.obs if space.contains(o.x)))

    def extend(self, obs: Iterable[Observation]) -> "Dataset":
        return Dataset(self.space, self.obs + tuple(obs))
