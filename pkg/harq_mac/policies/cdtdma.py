"""
Channel-dependent TDMA: the receiver feeds back the index of the strongest
user, which is the only one to transmit.
"""

import numpy as np

from harq_mac.constants import CDTDMA_ON, CDTDMA_ONOFF
from harq_mac.items import PolicyParams, SystemSpec
from harq_mac.mixins import ChunkResult, PolicyMixin
from harq_mac.optimizer import maximize_1d
from harq_mac.special import max_fading_survival


def onoff_objective(s, users, pbar):
    """
    p(s) ln(1 + K P s / p(s)) with p(s) = Pr[max gain > s].

    The scheduled user spends K P / p when on so that the per-user average
    stays at P.
    """
    s = np.asarray(s, dtype=float)
    p = np.asarray(max_fading_survival(users, s), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = p * np.log1p(users * pbar * s / p)
    return np.where(p > 0, value, 0.0)


class CdTdmaOnPolicy(PolicyMixin):
    name = CDTDMA_ON
    description = "Strongest user always transmits at fixed power and rate"
    attempts = (1,)

    def feedback_size(self):
        return self.users

    def objective(self, s):
        s = np.asarray(s, dtype=float)
        power = self.users * self.pbar
        return max_fading_survival(self.users, s) * np.log1p(s * power)

    def optimize(self):
        power = self.users * self.pbar
        if power == 0:
            return self.point(0.0, PolicyParams(policy=self.name, thresholds=(0.0,)))
        s, value = maximize_1d(self.objective, config=self.config)
        rate = float(np.log1p(s * power))
        return self.point(
            value, PolicyParams(policy=self.name, thresholds=(s,), rate=rate)
        )

    def check_params(self, params):
        super().check_params(params)
        self.require(params, "thresholds")

    def run_chunk(self, gains, params, state):
        slots = gains.shape[0]
        power = self.users * self.pbar
        rate = np.log1p(params.threshold * power)
        best, strongest = self._strongest(gains)
        rows = np.arange(slots)
        state["slot"] += slots

        powers = np.zeros_like(gains)
        powers[rows, best] = power
        rewards = np.zeros_like(gains)
        rewards[rows, best] = np.where(self._decoded(strongest, power, rate), rate, 0.0)
        return ChunkResult(
            symbols=best.astype(np.int64),
            powers=powers,
            rewards=rewards,
            attempts=self.fresh_attempts(slots),
        )


class CdTdmaOnOffPolicy(PolicyMixin):
    name = CDTDMA_ONOFF
    description = "Strongest user transmits only when its gain exceeds s"
    attempts = (1,)

    def feedback_size(self):
        return self.users + 1

    def objective(self, s):
        return onoff_objective(s, self.users, self.pbar)

    def on_power(self, threshold):
        """Transmit power of the scheduled user, K P / p(s)."""
        p = max_fading_survival(self.users, threshold)
        return self.users * self.pbar / p if p > 0 else 0.0

    def optimize(self):
        if self.pbar == 0:
            return self.point(0.0, PolicyParams(policy=self.name, thresholds=(0.0,)))
        s, value = maximize_1d(self.objective, config=self.config)
        rate = float(np.log1p(s * self.on_power(s)))
        return self.point(
            value,
            PolicyParams(policy=self.name, thresholds=(s,), rate=rate),
            details={"on_probability": max_fading_survival(self.users, s)},
        )

    def check_params(self, params):
        super().check_params(params)
        self.require(params, "thresholds")

    def run_chunk(self, gains, params, state):
        slots = gains.shape[0]
        threshold = params.threshold
        power = self.on_power(threshold)
        rate = np.log1p(threshold * power)
        best, strongest = self._strongest(gains)
        on = strongest > threshold
        rows = np.flatnonzero(on)
        state["slot"] += slots

        powers = np.zeros_like(gains)
        powers[rows, best[rows]] = power
        rewards = np.zeros_like(gains)
        decoded = self._decoded(strongest[rows], power, rate)
        rewards[rows, best[rows]] = np.where(decoded, rate, 0.0)
        return ChunkResult(
            symbols=np.where(on, best + 1, 0).astype(np.int64),
            powers=powers,
            rewards=rewards,
            attempts=self.fresh_attempts(slots),
        )


def cdtdma_on(users, pbar, **kwargs):
    return CdTdmaOnPolicy(SystemSpec(users=users, pbar=pbar), **kwargs).optimize()


def cdtdma_onoff(users, pbar, **kwargs):
    return CdTdmaOnOffPolicy(SystemSpec(users=users, pbar=pbar), **kwargs).optimize()
