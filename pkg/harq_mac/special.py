"""
Special functions and fading primitives.

All rates are in nats per channel use. The exponential integral here is the
standard E1(x) = int_x^inf e^(-t)/t dt.
"""

import math
from dataclasses import dataclass

import numpy as np

from harq_mac.constants import UNIT_RAYLEIGH
from harq_mac.exceptions import ArgumentError, DomainError

EULER_GAMMA = 0.57721566490153286061
_EPS = 1e-16
_TINY = 1e-300
_MAX_TERMS = 500


def _e1_series(x):
    # E1(x) = -gamma - ln(x) - sum_k (-x)^k / (k k!)
    total = -math.log(x) - EULER_GAMMA
    term = 1.0
    for k in range(1, _MAX_TERMS):
        term *= -x / k
        delta = -term / k
        total += delta
        if abs(delta) < abs(total) * _EPS:
            return total
    raise ArithmeticError(f"E1 series did not converge at x={x}")


def _e1_continued_fraction(x):
    # Modified Lentz evaluation of e^x E1(x) = 1/(x+1-) 1/(x+3-) 4/(x+5-) ...
    b = x + 1.0
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_TERMS):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h * math.exp(-x)
    raise ArithmeticError(f"E1 continued fraction did not converge at x={x}")


def _e1(x):
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"exp_integral is defined for x > 0, got {x}")
    if x <= 1.0:
        return _e1_series(x)
    return _e1_continued_fraction(x)


def exp_integral(x):
    """
    Exponential integral E1(x) for x > 0.

    Power series for x <= 1, continued fraction above. Accepts scalars or
    array-likes; relative accuracy is better than 1e-10 on (0, 700].
    """
    if np.ndim(x) == 0:
        return _e1(x)
    values = np.asarray(x, dtype=float)
    return np.array([_e1(value) for value in values.ravel()]).reshape(values.shape)


def max_fading_cdf(users, x):
    """cdf of the largest of ``users`` iid unit-mean exponential gains."""
    if users < 1:
        raise ArgumentError(f"users must be >= 1, got {users}")
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    # (1 - e^-x)^K evaluated through expm1 to keep precision near x = 0
    value = (-np.expm1(-x)) ** users
    return float(value) if value.ndim == 0 else value


def max_fading_survival(users, x):
    """1 - max_fading_cdf, accurate where the cdf is close to one."""
    if users < 1:
        raise ArgumentError(f"users must be >= 1, got {users}")
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    with np.errstate(divide="ignore"):
        value = -np.expm1(users * np.log1p(-np.exp(-x)))
    value = np.where(x == 0.0, 1.0, value)
    return float(value) if value.ndim == 0 else value


@dataclass(frozen=True)
class FadingModel:
    """
    Block-fading power gain model.

    ``diversity`` d draws the gain as the maximum of d iid unit exponentials;
    d = 1 is unit-power Rayleigh fading, d = K is the gain seen by the
    strongest of K users.
    """

    kind: str = UNIT_RAYLEIGH
    diversity: int = 1
    independent: bool = True

    def __post_init__(self):
        if self.kind != UNIT_RAYLEIGH:
            raise ArgumentError(f"Unsupported fading model {self.kind!r}")
        if self.diversity < 1:
            raise ArgumentError(f"diversity must be >= 1, got {self.diversity}")

    def cdf(self, x):
        return max_fading_cdf(self.diversity, x)

    def survival(self, x):
        return max_fading_survival(self.diversity, x)

    @property
    def mean(self):
        # E[max of d exponentials] is the d-th harmonic number
        return sum(1.0 / k for k in range(1, self.diversity + 1))

    def sample(self, rng, size):
        if self.diversity == 1:
            return rng.standard_exponential(size)
        uniform = rng.random(size)
        return -np.log1p(-(uniform ** (1.0 / self.diversity)))


def sample_fading(model, users, rng):
    """One slot of fading: ``users`` independent draws from ``model``."""
    return model.sample(rng, users)


def spawn_rng(seed, *key):
    """
    Independent generator for a (sweep point, policy, ...) key.

    The same (seed, key) always yields the same stream and distinct keys give
    statistically independent streams.
    """
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return np.random.default_rng(sequence)


def derive_seed(seed, *key):
    """Stable integer seed for a (seed, key) pair, independent across keys."""
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return int(sequence.generate_state(1)[0])


def db_to_linear(snr_db):
    value = 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)
    return float(value) if value.ndim == 0 else value


def linear_to_db(value):
    return 10.0 * np.log10(value)
