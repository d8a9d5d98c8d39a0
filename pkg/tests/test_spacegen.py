"""Tests for spacegen module."""

import numpy as np
import pytest

from spacerank.core import OutOfDomainError, ParamDomain, Scale, SearchSpace, volume
from spacerank.spacegen import (
    ReductionRate,
    centered_subspace,
    propose_search_spaces,
    random_subspace,
)


def fuzzed_space(rng):
    """A random space mixing linear and log10 dimensions."""
    dims = []
    for i in range(int(rng.integers(1, 7))):
        if rng.random() < 0.5:
            lower = rng.uniform(-5.0, 5.0)
            dims.append(
                ParamDomain(f"x{i}", lower=lower, upper=lower + rng.uniform(0.1, 10))
            )
        else:
            t_lower = rng.uniform(-6.0, 0.0)
            dims.append(
                ParamDomain.from_transformed(
                    f"x{i}", Scale.LOG10, t_lower, t_lower + rng.uniform(0.5, 5.0)
                )
            )
    return SearchSpace(tuple(dims), name="fuzz")


class TestReductionRate:
    """Tests for ReductionRate class."""

    @pytest.mark.parametrize("rho", [0.0, -0.1, 1.5, float("nan")])
    def test_out_of_range(self, rho):
        """Test rates outside (0, 1] are rejected."""
        with pytest.raises(ValueError):
            ReductionRate(rho)

    def test_per_dimension(self):
        """Test the per-dimension factor is the d-th root."""
        assert ReductionRate(0.25).per_dimension(2) == pytest.approx(0.5)


class TestRandomSubspace:
    """Tests for random_subspace function."""

    def test_volume_exact(self):
        """Test generated volume is rho times the base volume."""
        rng = np.random.default_rng(0)
        for case in range(100):
            base = fuzzed_space(rng)
            rho = float(rng.uniform(0.01, 1.0))
            sub = random_subspace(base, rho, seed=case)
            assert volume(sub) == pytest.approx(rho * volume(base), rel=1e-9)
            assert sub.is_subset_of(base)

    def test_rate_one_returns_base(self):
        """Test rho = 1 gives back the base box."""
        base = SearchSpace((ParamDomain("x"), ParamDomain("y")), name="base")
        sub = random_subspace(base, 1.0, seed=3)
        assert sub == base
        assert sub.provenance["rate"] == 1.0

    def test_deterministic(self):
        """Test equal seeds give equal boxes."""
        base = SearchSpace((ParamDomain("x"), ParamDomain("y")))
        assert random_subspace(base, 0.3, 7) == random_subspace(base, 0.3, 7)
        assert random_subspace(base, 0.3, 7) != random_subspace(base, 0.3, 8)

    def test_fixed_dimensions_untouched(self):
        """Test fixed dims are copied and only free dims shrink."""
        base = SearchSpace(
            (ParamDomain("x"), ParamDomain("r", lower=0.5, upper=0.5))
        )
        sub = random_subspace(base, 0.25, seed=0)
        assert sub.dim("r") == base.dim("r")
        assert sub.dim("x").t_length == pytest.approx(0.25)

    def test_grid_filtered(self):
        """Test grid values outside the sub-box are dropped."""
        grid = (0.0, 0.2, 0.4, 0.6, 0.8)
        base = SearchSpace((ParamDomain("r", lower=0.0, upper=0.8, grid=grid),))
        sub = random_subspace(base, 0.5, seed=2)
        dim = sub.dim("r")
        assert dim.grid
        assert all(dim.contains(g) for g in dim.grid)
        assert set(dim.grid) <= set(grid)


class TestCenteredSubspace:
    """Tests for centered_subspace function."""

    def test_interior_center_exact_volume(self):
        """Test an interior center keeps the full target volume."""
        base = SearchSpace((ParamDomain("x"), ParamDomain("y")))
        sub = centered_subspace(base, [0.5, 0.5], 0.04)
        assert volume(sub) == pytest.approx(0.04)
        np.testing.assert_allclose(sub.t_lower, [0.4, 0.4])

    def test_corner_center_clipped(self):
        """Test a corner center loses half the width per dimension."""
        rng = np.random.default_rng(1)
        for _ in range(20):
            base = fuzzed_space(rng)
            rho = float(rng.uniform(0.01, 0.9))
            sub = centered_subspace(base, [dim.lower for dim in base.dims], rho)
            expected = rho / 2 ** base.d * volume(base)
            assert volume(sub) == pytest.approx(expected, rel=1e-9)

    def test_center_outside_base(self):
        """Test a center outside the base is rejected."""
        base = SearchSpace((ParamDomain("x"),))
        with pytest.raises(OutOfDomainError):
            centered_subspace(base, [1.5], 0.5)


class TestProposeSearchSpaces:
    """Tests for propose_search_spaces function."""

    def test_names_and_count(self):
        """Test one space per rate and index, named by rate."""
        base = SearchSpace((ParamDomain("x"), ParamDomain("y")))
        spaces = propose_search_spaces(base, [0.1, 0.5], per_rate=3, seed=0)
        assert len(spaces) == 6
        assert [s.name for s in spaces[:3]] == ["rho=0.1/0", "rho=0.1/1", "rho=0.1/2"]
        assert spaces[3].name == "rho=0.5/0"

    def test_volumes_follow_rates(self):
        """Test every proposal has its rate's volume."""
        base = SearchSpace((ParamDomain("x", lower=0.0, upper=4.0), ParamDomain("y")))
        for space in propose_search_spaces(base, [0.2, 0.7], per_rate=4, seed=5):
            rho = space.provenance["rate"]
            assert volume(space) == pytest.approx(rho * volume(base))

    def test_reproducible(self):
        """Test equal seeds give identical proposals."""
        base = SearchSpace((ParamDomain("x"),))
        a = propose_search_spaces(base, [0.3], per_rate=5, seed=9)
        b = propose_search_spaces(base, [0.3], per_rate=5, seed=9)
        assert a == b

    def test_per_rate_positive(self):
        """Test per_rate must be at least one."""
        base = SearchSpace((ParamDomain("x"),))
        with pytest.raises(ValueError):
            propose_search_spaces(base, [0.5], per_rate=0, seed=0)
