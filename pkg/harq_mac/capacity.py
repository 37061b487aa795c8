"""
Ergodic water-filling capacity of the symmetric K-user block-fading MAC.

With perfect CSI at the transmitters only the strongest user transmits, with
power (1/x - 1/G)+ where G is the largest of the K unit-exponential gains and
x is the water level. Writing c_k = (-1)^(k-1) C(K, k):

    capacity(x)    = sum_k c_k E1(k x)
    power(x)       = sum_k c_k (e^(-k x) - k x E1(k x)) / x     (standard)
    power(x)       = sum_k c_k (e^(-k x) - k x E1(k x))         (paper, literal)

Power is the total spent by the scheduled user, so a per-user budget P
corresponds to power(x) = K P. The two conventions coincide at x = 1; only
the standard one equals E[(1/x - 1/G)+].
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from harq_mac.constants import CONVENTIONS, LITERAL, PAPER, STANDARD
from harq_mac.exceptions import ArgumentError, DomainError, RangeError
from harq_mac.special import exp_integral

logger = logging.getLogger(__name__)

DEFAULT_BRACKET = (1e-8, 50.0)
DEFAULT_RTOL = 1e-9
# exp(-x) underflows past this water level
_MAX_LEVEL = 700.0


@dataclass(frozen=True)
class WaterFillingSolution:
    water_level: float
    capacity: float
    average_power: float
    total_power: float
    users: int
    convention: str = STANDARD

    @property
    def capacity_bits(self):
        return self.capacity / math.log(2.0)


def _coefficients(users):
    return [(k, (-1) ** (k - 1) * math.comb(users, k)) for k in range(1, users + 1)]


def _check(users, level, convention):
    if users < 1:
        raise ArgumentError(f"users must be >= 1, got {users}")
    if convention not in CONVENTIONS:
        raise ArgumentError(
            f"Unknown convention {convention!r}, expected one of {CONVENTIONS}"
        )
    if not level > 0:
        raise DomainError(f"water level must be > 0, got {level}")


def ewfc_power_of_level(users, level, convention=STANDARD):
    """Total average power spent at water level ``level``."""
    _check(users, level, convention)
    power = sum(
        c * (math.exp(-k * level) - k * level * exp_integral(k * level))
        for k, c in _coefficients(users)
    )
    if convention == STANDARD:
        power /= level
    return max(power, 0.0)


def ewfc_capacity_of_level(users, level):
    _check(users, level, STANDARD)
    return sum(c * exp_integral(k * level) for k, c in _coefficients(users))


def power_range(users, convention=STANDARD):
    """Open interval of total powers reachable under ``convention``."""
    if convention in (PAPER, LITERAL):
        # sum_k c_k = 1 - (1 - 1)^K = 1 as the level goes to zero
        return (0.0, 1.0)
    return (0.0, math.inf)


def _bracket(users, target, convention, bracket):
    lo, hi = bracket
    low_cap, high_cap = power_range(users, convention)
    if not low_cap < target < high_cap:
        raise RangeError(
            f"Total power {target} is outside the achievable interval "
            f"({low_cap}, {high_cap}) of the {convention} convention",
            interval=(low_cap, high_cap),
        )
    while ewfc_power_of_level(users, lo, convention) < target:
        if lo < 1e-300:
            raise RangeError(
                f"Total power {target} cannot be bracketed under the "
                f"{convention} convention",
                interval=(low_cap, high_cap),
            )
        lo /= 10.0
    while ewfc_power_of_level(users, hi, convention) > target:
        if hi > _MAX_LEVEL:
            raise RangeError(
                f"Total power {target} is below the representable range "
                f"(level > {_MAX_LEVEL})",
                interval=(low_cap, high_cap),
            )
        hi *= 2.0
    return lo, hi


def solve_water_level(
    users, total_power, convention=STANDARD, bracket=DEFAULT_BRACKET, rtol=DEFAULT_RTOL
):
    lo, hi = _bracket(users, total_power, convention, bracket)

    def residual(log_level):
        power = ewfc_power_of_level(users, math.exp(log_level), convention)
        return math.log(max(power, 1e-300)) - math.log(total_power)

    log_level = optimize.bisect(
        residual, math.log(lo), math.log(hi), xtol=1e-14, rtol=4 * np.finfo(float).eps
    )
    level = math.exp(log_level)
    achieved = ewfc_power_of_level(users, level, convention)
    if abs(achieved - total_power) > rtol * total_power:
        logger.warning(
            f"Water level residual {abs(achieved - total_power) / total_power:.2e} "
            f"exceeds {rtol:.0e} for K={users}, power={total_power}"
        )
    return level


def ewfc_capacity(
    users, avg_power, convention=STANDARD, bracket=DEFAULT_BRACKET, rtol=DEFAULT_RTOL
):
    """
    Water-filling capacity for a per-user budget ``avg_power``.

    Raises RangeError when K * avg_power is outside what the convention can
    represent.
    """
    if users < 1:
        raise ArgumentError(f"users must be >= 1, got {users}")
    if not avg_power > 0:
        raise RangeError(
            f"Average power must be > 0, got {avg_power}",
            interval=power_range(users, convention),
        )
    total_power = users * avg_power
    level = solve_water_level(users, total_power, convention, bracket, rtol)
    return WaterFillingSolution(
        water_level=level,
        capacity=ewfc_capacity_of_level(users, level),
        average_power=avg_power,
        total_power=total_power,
        users=users,
        convention=convention,
    )


def ewfc_curve(users, avg_powers, convention=STANDARD):
    return [ewfc_capacity(users, power, convention) for power in avg_powers]
