import math

import numpy as np
import pytest
from scipy import integrate, special

from harq_mac.capacity import (
    ewfc_capacity,
    ewfc_capacity_of_level,
    ewfc_curve,
    ewfc_power_of_level,
    power_range,
    solve_water_level,
)
from harq_mac.constants import LITERAL, PAPER, STANDARD
from harq_mac.exceptions import ArgumentError, DomainError, RangeError

# Total power spent at water level 1 by a single user
UNIT_LEVEL_POWER = math.exp(-1.0) - special.exp1(1.0)


def strongest_density(users):
    return lambda g: users * math.exp(-g) * (-math.expm1(-g)) ** (users - 1)


def quad_capacity(users, level):
    density = strongest_density(users)
    value, _ = integrate.quad(
        lambda g: math.log(g / level) * density(g), level, np.inf, epsrel=1e-11
    )
    return value


def quad_power(users, level):
    density = strongest_density(users)
    value, _ = integrate.quad(
        lambda g: (1.0 / level - 1.0 / g) * density(g), level, np.inf, epsrel=1e-11
    )
    return value


def test_power_of_unit_level():
    """Test the single-user power at level one under both conventions."""
    assert ewfc_power_of_level(1, 1.0) == pytest.approx(UNIT_LEVEL_POWER, rel=1e-12)
    assert ewfc_power_of_level(1, 1.0, LITERAL) == pytest.approx(
        UNIT_LEVEL_POWER, rel=1e-12
    )


def test_capacity_example():
    """Test that the unit-level power inverts to E1(1)."""
    solution = ewfc_capacity(1, UNIT_LEVEL_POWER)
    assert solution.water_level == pytest.approx(1.0, rel=1e-9)
    assert solution.capacity == pytest.approx(0.2193839344, abs=1e-9)
    assert solution.capacity_bits == pytest.approx(solution.capacity / math.log(2))


@pytest.mark.parametrize("users", [1, 2, 3])
@pytest.mark.parametrize("level", [0.1, 0.5, 1.0, 2.0, 5.0])
def test_capacity_matches_quadrature(users, level):
    """Test the closed forms against quadrature over the strongest gain."""
    assert ewfc_capacity_of_level(users, level) == pytest.approx(
        quad_capacity(users, level), rel=1e-8
    )
    assert ewfc_power_of_level(users, level) == pytest.approx(
        quad_power(users, level), rel=1e-8
    )


def test_solve_water_level():
    """Test that the solved level reproduces the requested power."""
    for users in (1, 2, 4):
        level = solve_water_level(users, 2.0)
        assert ewfc_power_of_level(users, level) == pytest.approx(2.0, rel=1e-9)


def test_capacity_grows_with_users():
    """Test that capacity at a fixed per-user budget grows with K."""
    capacities = [ewfc_capacity(k, 1.0).capacity for k in (1, 2, 4)]
    assert capacities == sorted(capacities)
    assert capacities[0] < capacities[-1]


def test_capacity_vanishes_without_power():
    """Test that capacity goes to zero with the budget."""
    assert ewfc_capacity(1, 1e-6).capacity < 1e-4


def test_curve():
    """Test that the curve is increasing in the budget."""
    curve = ewfc_curve(2, [0.1, 1.0, 10.0])
    assert [s.average_power for s in curve] == [0.1, 1.0, 10.0]
    assert curve[0].capacity < curve[1].capacity < curve[2].capacity
    assert all(s.total_power == 2 * s.average_power for s in curve)


def test_power_range():
    """Test the reachable power interval of each convention."""
    assert power_range(2, STANDARD) == (0.0, math.inf)
    assert power_range(2, LITERAL) == (0.0, 1.0)
    assert power_range(2, PAPER) == (0.0, 1.0)


def test_paper_convention_alias():
    """Test that the "paper" convention solves like its "literal" alias."""
    paper = ewfc_capacity(2, 0.25, PAPER)
    literal = ewfc_capacity(2, 0.25, LITERAL)
    assert paper.convention == PAPER
    assert paper.water_level == literal.water_level
    assert paper.capacity == literal.capacity
    with pytest.raises(RangeError):
        ewfc_capacity(2, 1.0, PAPER)


def test_literal_range_error():
    """Test that the literal convention cannot reach a total power of two."""
    with pytest.raises(RangeError) as error:
        ewfc_capacity(2, 1.0, LITERAL)
    assert error.value.interval == (0.0, 1.0)


def test_errors():
    """Test argument validation."""
    with pytest.raises(RangeError):
        ewfc_capacity(2, 0.0)
    with pytest.raises(ArgumentError):
        ewfc_capacity(0, 1.0)
    with pytest.raises(ArgumentError):
        ewfc_power_of_level(2, 1.0, "printed")
    with pytest.raises(DomainError):
        ewfc_capacity_of_level(2, 0.0)
