"""
Channel-dependent TDMA with at most M attempts per packet.

The schedule is the on/off one: the strongest user transmits at K P / p
when its gain exceeds s, so every scheduled packet decodes. Each user's
attempt clock advances every slot and its packet is dropped once the M-th
slot passes unscheduled.
"""

import math

import numpy as np

from harq_mac.constants import CDTDMA_ALO
from harq_mac.items import PolicyParams, SystemSpec
from harq_mac.markov import (
    alo_rate,
    alo_renewal_quantities,
    build_alo_fsm,
    renewal_reward,
    stationary_distribution,
)
from harq_mac.mixins import ANY_ATTEMPTS, ChunkResult, PolicyMixin
from harq_mac.optimizer import maximize_1d
from harq_mac.special import max_fading_survival


class CdTdmaAloPolicy(PolicyMixin):
    name = CDTDMA_ALO
    description = "On/off scheduling with an at-least-once retransmission limit"
    attempts = ANY_ATTEMPTS
    analytic_users = (2,)
    analytic_attempts = (2,)

    def feedback_size(self):
        return self.users + 1

    def objective(self, s):
        s = np.asarray(s, dtype=float)
        p = np.asarray(max_fading_survival(self.users, s), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            rate = np.where(p > 0, np.log1p(self.users * self.pbar * s / p), 0.0)
        renewal = alo_renewal_quantities(p, rate)
        return renewal.cycle_reward / renewal.cycle_mean

    def optimize(self):
        self.check_analytic()
        if self.pbar == 0:
            return self.point(0.0, PolicyParams(policy=self.name, thresholds=(0.0,)))
        s, value = maximize_1d(self.objective, config=self.config)
        p = max_fading_survival(self.users, s)
        fsm = build_alo_fsm(s, self.pbar, self.users)
        summary = renewal_reward(fsm)
        details = {
            "on_probability": p,
            "cycle_mean": summary.cycle_mean,
            "renewal_probability": float(stationary_distribution(fsm)[fsm.renewal]),
            "chain_throughput": summary.throughput,
            "chain_power": summary.power,
        }
        params = PolicyParams(
            policy=self.name,
            thresholds=(s,),
            rate=alo_rate(s, self.pbar, p, self.users),
        )
        return self.point(value, params, details=details)

    def check_params(self, params):
        super().check_params(params)
        self.require(params, "thresholds")

    def start(self, params):
        return {"slot": 0, "attempts": [1] * self.users}

    def run_chunk(self, gains, params, state):
        slots = gains.shape[0]
        threshold = params.threshold
        p = max_fading_survival(self.users, threshold)
        power = self.users * self.pbar / p if p > 0 else 0.0
        rate = math.log1p(threshold * power)
        best, strongest = self._strongest(gains)
        on = strongest > threshold
        rows = np.flatnonzero(on)

        powers = np.zeros_like(gains)
        powers[rows, best[rows]] = power
        rewards = np.zeros_like(gains)
        decoded = self._decoded(strongest[rows], power, rate)
        rewards[rows, best[rows]] = np.where(decoded, rate, 0.0)

        last = self.spec.attempts
        current = state["attempts"]
        winners = np.where(on, best, -1).tolist()
        history = []
        for winner in winners:
            history.append(tuple(current))
            for user, attempt in enumerate(current):
                current[user] = 1 if user == winner or attempt >= last else attempt + 1
        state["slot"] += slots
        return ChunkResult(
            symbols=np.where(on, best + 1, 0).astype(np.int64),
            powers=powers,
            rewards=rewards,
            attempts=np.array(history, dtype=np.int64).reshape(slots, self.users),
        )


def cdtdma_alo(pbar, attempts=2, **kwargs):
    spec = SystemSpec(users=2, attempts=attempts, pbar=pbar)
    return CdTdmaAloPolicy(spec, **kwargs).optimize()
