import numpy as np

from harq_mac.constants import STATIC_TDMA
from harq_mac.items import PolicyParams, SystemSpec
from harq_mac.mixins import ChunkResult, PolicyMixin
from harq_mac.optimizer import maximize_1d


def single_user_objective(s, power):
    """Fixed-rate single-user throughput e^-s ln(1 + s P) at threshold s."""
    s = np.asarray(s, dtype=float)
    return np.exp(-s) * np.log1p(s * power)


def single_user_optimum(power, config=None):
    """(threshold, throughput) of one user transmitting at ``power`` every slot."""
    if power <= 0:
        return 0.0, 0.0
    return maximize_1d(lambda s: single_user_objective(s, power), config=config)


class StaticTdmaPolicy(PolicyMixin):
    """Round-robin slots; the owner transmits at K P at a fixed rate."""

    name = STATIC_TDMA
    description = "Round-robin TDMA without feedback"
    attempts = (1,)

    def objective(self, s):
        return single_user_objective(s, self.users * self.pbar)

    def optimize(self):
        power = self.users * self.pbar
        s, value = single_user_optimum(power, self.config)
        params = PolicyParams(
            policy=self.name, thresholds=(s,), rate=float(np.log1p(s * power))
        )
        return self.point(value, params)

    def check_params(self, params):
        super().check_params(params)
        self.require(params, "thresholds")

    def run_chunk(self, gains, params, state):
        slots = gains.shape[0]
        power = self.users * self.pbar
        rate = np.log1p(params.threshold * power)
        rows = np.arange(slots)
        owner = (state["slot"] + rows) % self.users
        state["slot"] += slots

        powers = np.zeros_like(gains)
        powers[rows, owner] = power
        rewards = np.zeros_like(gains)
        decoded = self._decoded(gains[rows, owner], power, rate)
        rewards[rows[decoded], owner[decoded]] = rate
        return ChunkResult(
            symbols=np.zeros(slots, dtype=np.int64),
            powers=powers,
            rewards=rewards,
            attempts=self.fresh_attempts(slots),
        )


def static_tdma(users, pbar, **kwargs):
    return StaticTdmaPolicy(SystemSpec(users=users, pbar=pbar), **kwargs).optimize()
