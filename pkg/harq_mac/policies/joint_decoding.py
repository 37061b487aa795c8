"""
Fixed-rate joint (successive) decoding with no feedback.

Every user transmits at its budget in every slot. The receiver decodes the
largest set of users it can, treating the others as noise. For two users at
common power P and rate R = ln(1 + s P) the outcome probabilities are

    both decoded   e^(-2s) e^(-P s^2) (1 + P s^2)
    only user 1    e^(-s) (1 - e^(-s (1 + P s))) / (1 + P s)
"""

import numpy as np

from harq_mac.constants import JOINT_DECODING
from harq_mac.exceptions import ArgumentError
from harq_mac.items import PolicyParams, SystemSpec
from harq_mac.mixins import DECODE_RTOL, ChunkResult, PolicyMixin
from harq_mac.optimizer import maximize_1d
from harq_mac.special import spawn_rng

# Relative disagreement between closed form and Monte Carlo worth a warning
MC_GAP_WARNING = 0.01


def joint_outage_probs(rate1, rate2, power1, power2, samples, seed=None):
    """Monte Carlo (P11, P10, P01) for two users with unit-exponential gains."""
    if samples < 1:
        raise ArgumentError(f"samples must be >= 1, got {samples}")
    rng = spawn_rng(seed) if seed is not None else np.random.default_rng()
    gains = rng.standard_exponential((samples, 2))
    snr1 = gains[:, 0] * power1
    snr2 = gains[:, 1] * power2
    alone1 = rate1 <= np.log1p(snr1)
    alone2 = rate2 <= np.log1p(snr2)
    both = alone1 & alone2 & (rate1 + rate2 <= np.log1p(snr1 + snr2))
    only1 = (rate1 <= np.log1p(snr1 / (1.0 + snr2))) & ~alone2
    only2 = (rate2 <= np.log1p(snr2 / (1.0 + snr1))) & ~alone1
    return float(both.mean()), float(only1.mean()), float(only2.mean())


def joint_outage_probs_exact(s, pbar):
    """Closed-form (P11, P10, P01) at common threshold ``s`` and power ``pbar``."""
    s = np.asarray(s, dtype=float)
    spread = pbar * s * s
    both = np.exp(-2.0 * s - spread) * (1.0 + spread)
    one = np.exp(-s) * -np.expm1(-s * (1.0 + pbar * s)) / (1.0 + pbar * s)
    return both, one, one


def joint_objective(s, pbar):
    both, only1, only2 = joint_outage_probs_exact(s, pbar)
    return np.log1p(pbar * np.asarray(s, dtype=float)) * (2.0 * both + only1 + only2)


def joint_optimum(power, config=None):
    """(threshold, throughput) of symmetric two-user joint decoding at ``power``."""
    if power <= 0:
        return 0.0, 0.0
    return maximize_1d(lambda s: joint_objective(s, power), config=config)


def mac_decode(snr, rates):
    """
    Users decoded in each slot.

    ``snr`` is (slots, K) received SNR and ``rates`` the K transmitted rates.
    A set S is decodable when every subset A of S satisfies
    sum_A R <= ln(1 + sum_A snr / (1 + sum_{not S} snr)); the decodable set
    with the largest sum rate wins, the first found on ties.
    """
    snr = np.asarray(snr, dtype=float)
    rates = np.asarray(rates, dtype=float)
    slots, users = snr.shape
    decoded = np.zeros((slots, users), dtype=bool)
    best = np.zeros(slots)
    total = snr.sum(axis=1)
    for mask in range(1, 1 << users):
        members = np.array([(mask >> k) & 1 for k in range(users)], dtype=bool)
        noise = 1.0 + total - snr[:, members].sum(axis=1)
        feasible = np.ones(slots, dtype=bool)
        sub = mask
        while sub:
            chosen = np.array([(sub >> k) & 1 for k in range(users)], dtype=bool)
            need = rates[chosen].sum() * (1.0 - DECODE_RTOL)
            feasible &= need <= np.log1p(snr[:, chosen].sum(axis=1) / noise)
            sub = (sub - 1) & mask
        reward = rates[members].sum()
        better = feasible & (reward > best)
        decoded[better] = members
        best[better] = reward
    return decoded


class JointDecodingPolicy(PolicyMixin):
    name = JOINT_DECODING
    description = "All users transmit every slot; receiver decodes jointly"
    attempts = (1,)
    analytic_users = (2,)

    def objective(self, s):
        return joint_objective(s, self.pbar)

    def optimize(self):
        self.check_analytic()
        s, value = joint_optimum(self.pbar, self.config)
        rate = float(np.log1p(self.pbar * s))
        both, only1, only2 = (float(p) for p in joint_outage_probs_exact(s, self.pbar))
        details = {"p11": both, "p10": only1, "p01": only2}

        samples = self.settings.getint("JOINT_MC_SAMPLES", 0)
        if samples and value > 0:
            seed = self.settings.getint("SIM_SEED", 0)
            mc = joint_outage_probs(rate, rate, self.pbar, self.pbar, samples, seed)
            mc_value = rate * (2.0 * mc[0] + mc[1] + mc[2])
            gap = abs(mc_value - value) / value
            details.update(monte_carlo=mc_value, mc_gap=gap)
            if gap > MC_GAP_WARNING:
                self.logger.warning(
                    f"Closed form {value:.6f} and Monte Carlo {mc_value:.6f} "
                    f"differ by {gap:.2%} at P={self.pbar}"
                )

        params = PolicyParams(policy=self.name, thresholds=(s,), rate=rate)
        return self.point(value, params, details=details)

    def check_params(self, params):
        super().check_params(params)
        self.require(params, "thresholds")

    def run_chunk(self, gains, params, state):
        slots = gains.shape[0]
        rate = np.log1p(self.pbar * params.threshold)
        powers = np.full_like(gains, self.pbar)
        decoded = mac_decode(gains * powers, np.full(self.users, rate))
        state["slot"] += slots
        return ChunkResult(
            symbols=np.zeros(slots, dtype=np.int64),
            powers=powers,
            rewards=np.where(decoded, rate, 0.0),
            attempts=self.fresh_attempts(slots),
        )


def joint_decoding_sym(pbar, **kwargs):
    return JointDecodingPolicy(SystemSpec(users=2, pbar=pbar), **kwargs).optimize()
