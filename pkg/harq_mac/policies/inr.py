"""
Channel-dependent TDMA with incremental redundancy.

The strongest user owns the slot. Its receiver knows the information still
missing for the current packet and feeds back one of L power levels of the
current attempt, the smallest one that finishes the packet. Information
accumulates over at most M owned slots. Only owned slots advance a user's
attempt clock, so each user sees the single-user protocol under the fading
of the strongest of K gains and the K-user throughput equals the
single-user one at power K P.
"""

import math
from dataclasses import replace

import numpy as np

from harq_mac.constants import ACCUMULATE, CDTDMA_INR, LAST_CHANCE
from harq_mac.exceptions import ConfigurationError
from harq_mac.items import InrLevels, PolicyParams, SystemSpec
from harq_mac.mixins import ANY_ATTEMPTS, DECODE_RTOL, ChunkResult, PolicyMixin
from harq_mac.policies.multilevel import MultilevelCdTdmaPolicy
from harq_mac.simulator import (
    WARM_WINDOW_LOG,
    inr_choice,
    inr_single_user,
    optimize_inr_levels,
)
from harq_mac.special import FadingModel, derive_seed


class CdTdmaInrPolicy(PolicyMixin):
    name = CDTDMA_INR
    description = "Multilevel scheduling with incremental redundancy over M slots"
    attempts = ANY_ATTEMPTS
    uses_levels = True

    def feedback_size(self):
        return self.users * self.levels + 1

    @property
    def mode(self):
        return self.settings.get("INR_DEEP_FADE", LAST_CHANCE)

    def seeds(self):
        """(search, report) seeds; a policy seed gives each its own stream."""
        if self.seed is None:
            return (
                self.settings.getint("OPTIMIZER_SEED"),
                self.settings.getint("SIM_SEED"),
            )
        return derive_seed(self.seed, 0), derive_seed(self.seed, 1)

    @property
    def strongest_fading(self):
        return FadingModel(diversity=self.spec.fading.diversity * self.users)

    def objective(self, inr, slots=None, seed=None):
        """Simulated single-user throughput of the levels ``inr``."""
        report = inr_single_user(
            inr,
            self.strongest_fading,
            slots or self.settings.getint("INR_SIM_BUDGET", 100_000),
            self.settings.getint("SIM_SEED") if seed is None else seed,
            self.mode,
            self.settings,
        )
        return report.throughput_est

    def warm_start(self):
        """Multilevel optimum repeated over every attempt."""
        multilevel = MultilevelCdTdmaPolicy(
            replace(self.spec, attempts=1, feedback=None),
            levels=self.levels,
            settings=self.settings,
            config=self.config,
        ).optimize()
        levels = tuple(sorted(multilevel.details["level_powers"]))
        attempts = self.spec.attempts
        windows = ()
        if self.mode == ACCUMULATE:
            windows = (1.0 + math.exp(WARM_WINDOW_LOG),) * (attempts - 1)
        inr = InrLevels(
            rate=multilevel.params.rate, powers=(levels,) * attempts, windows=windows
        )
        return inr, multilevel

    def optimize(self):
        if self.pbar == 0:
            return self.point(
                0.0, PolicyParams(policy=self.name, levels=self.levels, rate=0.0)
            )
        power = self.users * self.pbar
        search_seed, report_seed = self.seeds()
        inr, multilevel = self.warm_start()
        details = {"multilevel": multilevel.throughput}
        if self.spec.attempts > 1:
            inr, search_value = optimize_inr_levels(
                self.spec.attempts,
                self.levels,
                power,
                self.strongest_fading,
                seed=search_seed,
                start=inr,
                mode=self.mode,
                settings=self.settings,
            )
            details["search"] = search_value

        report = inr_single_user(
            inr,
            self.strongest_fading,
            self.settings.getint("SIM_SLOTS"),
            report_seed,
            self.mode,
            self.settings,
        )
        if report.power_est > power + report.ci_halfwidth_power:
            self.logger.warning(
                f"INR levels spend {report.power_est:.4f} against a budget of "
                f"{power:.4f}"
            )
        details["power_per_user"] = report.power_est / self.users
        params = PolicyParams(
            policy=self.name, levels=self.levels, rate=inr.rate, inr=inr
        )
        return self.point(report.throughput_est, params, report=report, details=details)

    def check_params(self, params):
        super().check_params(params)
        self.require(params, "inr")
        inr = params.inr
        if inr.attempts != self.spec.attempts or inr.levels != self.levels:
            raise ConfigurationError(
                f"{self.name} with M={self.spec.attempts}, L={self.levels} got "
                f"levels for M={inr.attempts}, L={inr.levels}"
            )

    def start(self, params):
        return {
            "slot": 0,
            "attempts": [1] * self.users,
            "info": [0.0] * self.users,
        }

    def run_chunk(self, gains, params, state):
        slots = gains.shape[0]
        inr = params.inr
        rate = inr.rate
        last = self.spec.attempts
        mode = self.mode
        best, strongest = self._strongest(gains)

        powers = np.zeros_like(gains)
        rewards = np.zeros_like(gains)
        symbols = np.zeros(slots, dtype=np.int64)
        history = []
        attempts = state["attempts"]
        info = state["info"]
        for slot, (user, gain) in enumerate(zip(best.tolist(), strongest.tolist())):
            history.append(tuple(attempts))
            attempt = attempts[user]
            needed = math.expm1(rate - info[user]) / gain if gain > 0 else math.inf
            level, power = inr_choice(inr, attempt - 1, needed, attempt == last, mode)
            if level:
                symbols[slot] = level + self.levels * user
                powers[slot, user] = power
                info[user] += math.log1p(gain * power)
            if info[user] >= rate * (1.0 - DECODE_RTOL):
                rewards[slot, user] = rate
                attempts[user], info[user] = 1, 0.0
            elif attempt == last:
                attempts[user], info[user] = 1, 0.0
            else:
                attempts[user] = attempt + 1
        state["slot"] += slots
        return ChunkResult(
            symbols=symbols,
            powers=powers,
            rewards=rewards,
            attempts=np.array(history, dtype=np.int64).reshape(slots, self.users),
        )


def cdtdma_inr(users, attempts, levels, pbar, **kwargs):
    spec = SystemSpec(users=users, attempts=attempts, pbar=pbar)
    return CdTdmaInrPolicy(spec, levels=levels, **kwargs).optimize()
