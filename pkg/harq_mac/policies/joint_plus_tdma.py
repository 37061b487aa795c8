"""
Time split between single-user slots and joint-decoding slots.

A fraction tau of the slots alternates between the two users, which spend
a fraction alpha of their energy there; the rest of the slots run symmetric
joint decoding with the remaining energy. tau = alpha = 1 is static TDMA and
tau = alpha = 0 is pure joint decoding.
"""

import math

import numpy as np

from harq_mac.constants import JOINT_PLUS_TDMA
from harq_mac.exceptions import ConfigurationError
from harq_mac.items import PolicyParams, SystemSpec
from harq_mac.mixins import ChunkResult, PolicyMixin
from harq_mac.optimizer import maximize_nd
from harq_mac.policies.joint_decoding import joint_optimum, mac_decode
from harq_mac.policies.static_tdma import single_user_optimum

UNIT_BOX = [(0.0, 1.0), (0.0, 1.0)]


def phase_powers(tau, alpha, pbar, users=2):
    """Per-slot powers (single-user phase, joint phase)."""
    single = users * alpha * pbar / tau if tau > 0 else 0.0
    joint = (1.0 - alpha) * pbar / (1.0 - tau) if tau < 1 else 0.0
    return single, joint


def single_user_slots(first_slot, slots, tau):
    """Slot t is single-user when floor((t + 1) tau) > floor(t tau)."""
    index = first_slot + np.arange(slots, dtype=np.int64)
    before = np.floor(index * tau)
    single = (np.floor((index + 1) * tau) - before) >= 1
    return single, before.astype(np.int64)


class JointPlusTdmaPolicy(PolicyMixin):
    name = JOINT_PLUS_TDMA
    description = "Time share between alternating single-user and joint slots"
    attempts = (1,)
    analytic_users = (2,)

    def objective(self, x):
        tau, alpha = (min(max(float(v), 0.0), 1.0) for v in x)
        single, joint = phase_powers(tau, alpha, self.pbar, self.users)
        value = 0.0
        if tau > 0:
            value += tau * single_user_optimum(single, self.config)[1]
        if tau < 1:
            value += (1.0 - tau) * joint_optimum(joint, self.config)[1]
        return value

    def optimize(self):
        self.check_analytic()
        x, value = maximize_nd(
            self.objective,
            dim=2,
            init_box=UNIT_BOX,
            config=self.config,
            starts=[(1.0, 1.0), (0.0, 0.0), (0.5, 0.5)],
            bounds=UNIT_BOX,
        )
        tau, alpha = (float(v) for v in x)
        single, joint = phase_powers(tau, alpha, self.pbar, self.users)
        s_single = single_user_optimum(single, self.config)[0] if tau > 0 else 0.0
        s_joint = joint_optimum(joint, self.config)[0] if tau < 1 else 0.0
        rate_single = math.log1p(s_single * single)
        rate_joint = math.log1p(s_joint * joint)
        params = PolicyParams(
            policy=self.name,
            thresholds=(s_single, s_joint),
            tau=tau,
            alpha=alpha,
            rate=rate_single,
        )
        details = {
            "power_single": single,
            "power_joint": joint,
            "rate_single": rate_single,
            "rate_joint": rate_joint,
        }
        return self.point(value, params, details=details)

    def check_params(self, params):
        super().check_params(params)
        self.require(params, "thresholds", "tau", "alpha")
        if len(params.thresholds) != 2:
            raise ConfigurationError(
                f"{self.name} needs (s_single, s_joint), got {params.thresholds}"
            )

    def run_chunk(self, gains, params, state):
        slots, users = gains.shape
        s_single, s_joint = params.thresholds
        single_power, joint_power = phase_powers(
            params.tau, params.alpha, self.pbar, users
        )
        rate_single = math.log1p(s_single * single_power)
        rate_joint = math.log1p(s_joint * joint_power)
        single, owner_index = single_user_slots(state["slot"], slots, params.tau)
        state["slot"] += slots

        powers = np.zeros_like(gains)
        rewards = np.zeros_like(gains)

        rows = np.flatnonzero(single)
        owner = owner_index[rows] % users
        powers[rows, owner] = single_power
        ok = self._decoded(gains[rows, owner], single_power, rate_single)
        rewards[rows[ok], owner[ok]] = rate_single

        rows = np.flatnonzero(~single)
        if rows.size:
            powers[rows] = joint_power
            decoded = mac_decode(gains[rows] * joint_power, np.full(users, rate_joint))
            rewards[rows] = np.where(decoded, rate_joint, 0.0)

        return ChunkResult(
            symbols=np.zeros(slots, dtype=np.int64),
            powers=powers,
            rewards=rewards,
            attempts=self.fresh_attempts(slots),
        )


def joint_plus_tdma(pbar, **kwargs):
    return JointPlusTdmaPolicy(SystemSpec(users=2, pbar=pbar), **kwargs).optimize()
