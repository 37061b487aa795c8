"""
Multilevel channel-dependent TDMA.

The receiver quantizes the strongest gain g against s_1 < ... < s_L and
feeds back the bin together with the user index. In bin l (s_l < g <=
s_(l+1)) the user sends at P_l = (e^R - 1) / s_l, which always decodes.
With D = sum_l Pr[bin l] / s_l the budget K P fixes e^R - 1 = K P / D, so

    throughput = Pr[g > s_1] ln(1 + K P / D)

One level is exactly the on/off policy.
"""

import math
from dataclasses import replace

import numpy as np

from harq_mac.constants import MULTILEVEL_CDTDMA
from harq_mac.exceptions import ConfigurationError
from harq_mac.items import PolicyParams, SystemSpec
from harq_mac.mixins import ChunkResult, PolicyMixin
from harq_mac.optimizer import maximize_nd
from harq_mac.policies.cdtdma import CdTdmaOnOffPolicy
from harq_mac.special import max_fading_survival

# exp(U_MAX) is past the threshold domain
U_MIN, U_MAX = -30.0, 4.1
LOG_BOX = (math.log(0.05), math.log(5.0))
# Spacing of the extra level added when warm starting from L - 1 levels
NEW_LEVEL_GAPS = (40.0, 1.0)


def thresholds_from_logs(u):
    """s_1 = e^u_1, s_(l+1) = s_l + e^u_(l+1)."""
    return np.cumsum(np.exp(np.clip(np.asarray(u, dtype=float), U_MIN, U_MAX)))


def logs_from_thresholds(thresholds):
    thresholds = np.asarray(thresholds, dtype=float)
    return np.log(np.diff(thresholds, prepend=0.0))


def multilevel_terms(thresholds, users):
    """(Pr[g > s_1], D) for increasing thresholds."""
    thresholds = np.asarray(thresholds, dtype=float)
    survival = np.append(max_fading_survival(users, thresholds), 0.0)
    probabilities = survival[:-1] - survival[1:]
    return float(survival[0]), float(np.sum(probabilities / thresholds))


def multilevel_objective(thresholds, users, pbar):
    on, spread = multilevel_terms(thresholds, users)
    if spread <= 0 or on <= 0:
        return 0.0
    return on * math.log1p(users * pbar / spread)


class MultilevelCdTdmaPolicy(PolicyMixin):
    name = MULTILEVEL_CDTDMA
    description = "Strongest user picks one of L power levels from the feedback"
    attempts = (1,)
    uses_levels = True

    def feedback_size(self):
        return self.users * self.levels + 1

    def objective(self, thresholds):
        return multilevel_objective(thresholds, self.users, self.pbar)

    def rate(self, thresholds):
        _, spread = multilevel_terms(thresholds, self.users)
        return math.log1p(self.users * self.pbar / spread) if spread > 0 else 0.0

    def level_powers(self, thresholds, rate):
        return math.expm1(rate) / np.asarray(thresholds, dtype=float)

    def optimize(self):
        if self.pbar == 0:
            params = PolicyParams(
                policy=self.name, thresholds=(0.0,) * self.levels, levels=self.levels
            )
            return self.point(0.0, params)
        if self.levels == 1:
            return self._from_onoff()

        previous = MultilevelCdTdmaPolicy(
            replace(self.spec, feedback=None),
            levels=self.levels - 1,
            settings=self.settings,
            config=self.config,
        ).optimize()
        base = np.asarray(previous.params.thresholds, dtype=float)
        starts = [
            logs_from_thresholds(np.append(base, base[-1] + gap))
            for gap in NEW_LEVEL_GAPS
        ]
        u, value = maximize_nd(
            lambda u: self.objective(thresholds_from_logs(u)),
            dim=self.levels,
            init_box=[LOG_BOX] * self.levels,
            config=self.config,
            starts=starts,
        )
        return self._point(thresholds_from_logs(u), value)

    def _from_onoff(self):
        onoff = CdTdmaOnOffPolicy(
            replace(self.spec, feedback=None),
            settings=self.settings,
            config=self.config,
        ).optimize()
        return self._point(np.asarray(onoff.params.thresholds), onoff.throughput)

    def _point(self, thresholds, value):
        rate = self.rate(thresholds)
        params = PolicyParams(
            policy=self.name,
            thresholds=tuple(float(s) for s in thresholds),
            levels=self.levels,
            rate=rate,
        )
        details = {
            "level_powers": tuple(float(p) for p in self.level_powers(thresholds, rate))
        }
        return self.point(value, params, details=details)

    def check_params(self, params):
        super().check_params(params)
        self.require(params, "thresholds")
        thresholds = params.thresholds
        if len(thresholds) != self.levels or any(
            b <= a for a, b in zip(thresholds, thresholds[1:])
        ):
            raise ConfigurationError(
                f"{self.name} needs {self.levels} increasing thresholds, "
                f"got {thresholds}"
            )
        if thresholds[0] <= 0:
            raise ConfigurationError(f"{self.name} needs s_1 > 0, got {thresholds}")

    def run_chunk(self, gains, params, state):
        slots = gains.shape[0]
        thresholds = np.asarray(params.thresholds, dtype=float)
        rate = self.rate(thresholds)
        levels = self.level_powers(thresholds, rate)
        best, strongest = self._strongest(gains)
        # number of thresholds strictly below the gain; 0 means silent
        level = np.searchsorted(thresholds, strongest, side="left")
        rows = np.flatnonzero(level > 0)
        state["slot"] += slots

        power = levels[level[rows] - 1]
        powers = np.zeros_like(gains)
        powers[rows, best[rows]] = power
        rewards = np.zeros_like(gains)
        decoded = self._decoded(strongest[rows], power, rate)
        rewards[rows, best[rows]] = np.where(decoded, rate, 0.0)
        symbols = np.where(level > 0, level + self.levels * best, 0)
        return ChunkResult(
            symbols=symbols.astype(np.int64),
            powers=powers,
            rewards=rewards,
            attempts=self.fresh_attempts(slots),
        )


def multilevel_cdtdma(users, pbar, levels, **kwargs):
    spec = SystemSpec(users=users, pbar=pbar)
    return MultilevelCdTdmaPolicy(spec, levels=levels, **kwargs).optimize()
