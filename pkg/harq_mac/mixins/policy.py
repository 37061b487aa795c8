"""
Base mixin for throughput policies.

A policy has two faces:

    analytic  ``objective`` / ``optimize`` return the optimized long-term
              throughput of the symmetric system as a ThroughputPoint.
    protocol  ``start`` / ``run_chunk`` turn a block of fading draws into
              feedback symbols, transmit powers and decoded rates; the
              simulator drives them slot block by slot block.

Required class variables (enforced by __init_subclass__):
    name (str): policy identifier, one of harq_mac.constants.POLICIES
    description (str): one-line summary used by the CLI
    attempts (tuple[int] | str): allowed M values, or ANY_ATTEMPTS

Example:
    class CdTdmaOnPolicy(PolicyMixin):
        name = CDTDMA_ON
        description = "Strongest user transmits at fixed power"
        attempts = (1,)

        def feedback_size(self):
            return self.users
"""

import logging
from dataclasses import dataclass

import numpy as np

from harq_mac.capacity import ewfc_capacity
from harq_mac.exceptions import ArgumentError, ConfigurationError, RangeError
from harq_mac.items import ThroughputPoint
from harq_mac.optimizer import OptimizerConfig
from harq_mac.settings import get_settings

ANY_ATTEMPTS = "any"

# Mutual information equal to the rate up to rounding still decodes
DECODE_RTOL = 1e-12


@dataclass
class ChunkResult:
    """Per-slot outcome of one block of slots."""

    symbols: np.ndarray
    powers: np.ndarray
    rewards: np.ndarray
    attempts: np.ndarray


class PolicyMixin:
    # Required to be overridden (enforced by __init_subclass__)
    name = None
    description = None
    attempts = None

    _required_vars = [
        "name",
        "description",
        "attempts",
    ]

    # Restrictions of the closed forms; None means any
    analytic_users = None
    analytic_attempts = None
    # Whether the feedback carries one of L power levels
    uses_levels = False

    def __init_subclass__(cls, **kwargs):
        """Enforces the implementation of required class variables in subclasses."""
        super().__init_subclass__(**kwargs)

        missing_vars = []
        for var in cls._required_vars:
            value = getattr(cls, var, None)
            if value is None:
                missing_vars.append(var)

        if missing_vars:
            missing_vars_str = ", ".join(missing_vars)
            raise NotImplementedError(
                f"{cls.__name__} must define the following class variable(s): "
                f"{missing_vars_str}."
            )

    def __init__(self, spec, levels=1, settings=None, config=None, seed=None):
        self.spec = spec
        self.levels = levels
        # Seed of the policy's own Monte Carlo, None for the settings default
        self.seed = seed
        self.settings = settings or get_settings()
        self.config = config or OptimizerConfig.from_settings(self.settings)
        self.check_spec()

    @property
    def logger(self):
        return logging.getLogger(f"harq_mac.policies.{self.name}")

    @property
    def users(self):
        return self.spec.users

    @property
    def pbar(self):
        return self.spec.pbar

    def feedback_size(self):
        """Feedback alphabet size implied by the policy."""
        return 1

    def check_spec(self):
        if self.levels < 1:
            raise ArgumentError(f"levels must be >= 1, got {self.levels}")
        if self.levels > 1 and not self.uses_levels:
            raise ConfigurationError(
                f"{self.name} does not support L={self.levels} power levels"
            )
        if self.attempts != ANY_ATTEMPTS and self.spec.attempts not in self.attempts:
            raise ConfigurationError(
                f"{self.name} supports M in {self.attempts}, got M={self.spec.attempts}"
            )
        implied = self.feedback_size()
        if self.spec.feedback is not None and self.spec.feedback != implied:
            raise ConfigurationError(
                f"{self.name} with K={self.users}, L={self.levels} implies "
                f"F={implied}, got F={self.spec.feedback}"
            )

    def check_analytic(self):
        """Raise unless the closed form covers this system."""
        if self.analytic_users and self.users not in self.analytic_users:
            raise ConfigurationError(
                f"The {self.name} closed form is available for K in "
                f"{self.analytic_users} only (F={self.feedback_size()}), "
                f"got K={self.users}"
            )
        if self.analytic_attempts and self.spec.attempts not in self.analytic_attempts:
            raise ConfigurationError(
                f"The {self.name} closed form is available for M in "
                f"{self.analytic_attempts} only, got M={self.spec.attempts}"
            )

    def check_params(self, params):
        if params.policy != self.name:
            raise ConfigurationError(
                f"Parameters for {params.policy!r} passed to {self.name!r}"
            )

    def require(self, params, *fields):
        missing = [name for name in fields if getattr(params, name) in (None, ())]
        if missing:
            raise ConfigurationError(
                f"{self.name} parameters need: {', '.join(missing)}"
            )

    # Analytic face

    def objective(self, s):
        raise NotImplementedError

    def optimize(self):
        raise NotImplementedError

    def point(self, throughput, params, **kwargs):
        """Wrap an optimized value into a normalized ThroughputPoint."""
        return ThroughputPoint(
            avg_power=self.pbar,
            throughput=throughput,
            params=params,
            normalized=self.normalize(throughput),
            **kwargs,
        )

    def normalize(self, throughput):
        if self.pbar == 0:
            return 0.0
        convention = self.settings.get("CAPACITY_CONVENTION", "standard")
        try:
            capacity = ewfc_capacity(self.users, self.pbar, convention).capacity
        except RangeError as error:
            self.logger.warning(f"No water-filling reference: {error}")
            return float("nan")
        return throughput / capacity

    # Protocol face

    def start(self, params):
        """Fresh protocol state at the first slot."""
        return {"slot": 0}

    def run_chunk(self, gains, params, state):
        raise NotImplementedError

    def fresh_attempts(self, slots):
        return np.ones((slots, self.users), dtype=np.int64)

    def _decoded(self, gains, powers, rate):
        """Single-user decoding: mutual information reaches the rate."""
        return np.log1p(gains * powers) >= rate * (1.0 - DECODE_RTOL)

    def _strongest(self, gains):
        # argmax returns the lowest index on ties
        best = np.argmax(gains, axis=1)
        return best, gains[np.arange(gains.shape[0]), best]
