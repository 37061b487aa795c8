"""
Finite-state renewal-reward analysis of the two-user ALO protocol.

States are pairs (i, j) of attempt indices. Every slot each user's attempt
index advances unless its packet is decoded or it has used its last attempt,
in which case it starts a fresh packet. With the per-user success
probability p/2 of being scheduled:

    (1,1) -> (1,2) p/2, (2,1) p/2, (2,2) 1-p
    (1,2) -> (1,1) p/2, (2,1) 1-p/2
    (2,1) -> (1,1) p/2, (1,2) 1-p/2
    (2,2) -> (1,1) 1

The chain renews in (1,1); its stationary mass there is 1/(4-p).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order

from harq_mac.exceptions import ArgumentError, DomainError, ModelError
from harq_mac.special import max_fading_survival

ALO_STATES = ((1, 1), (1, 2), (2, 1), (2, 2))


@dataclass(frozen=True)
class FsmModel:
    """
    Markov chain with per-transition expected reward and power.

    ``rewards[i, j]`` and ``powers[i, j]`` are the expectations given a
    transition from state i to state j. ``limit`` is the stationary law used
    when the chain degenerates into more than one closed class; it must still
    satisfy pi T = pi.
    """

    states: tuple
    transitions: np.ndarray
    renewal: int = 0
    rewards: np.ndarray = None
    powers: np.ndarray = None
    limit: np.ndarray = None

    @property
    def size(self):
        return len(self.states)

    def check_entries(self):
        matrix = np.asarray(self.transitions, dtype=float)
        n = self.size
        if matrix.shape != (n, n):
            raise ModelError(f"Transition matrix shape {matrix.shape} for {n} states")
        if (matrix < 0).any():
            raise ModelError("Transition matrix has negative entries")
        if not np.allclose(matrix.sum(axis=1), 1.0, rtol=0, atol=1e-12):
            raise ModelError("Transition matrix rows do not sum to one")
        for name in ("rewards", "powers"):
            values = getattr(self, name)
            if values is not None and (np.asarray(values) < 0).any():
                raise ModelError(f"Negative {name} in FSM model")
        return self

    def unichain_error(self):
        """Reason the chain is not aperiodic unichain, or None."""
        matrix = np.asarray(self.transitions, dtype=float)
        graph = csr_matrix(matrix > 0)
        # Every state must lead to the renewal state; states it cannot reach
        # back are transient and carry no stationary mass.
        leads_home = breadth_first_order(
            graph.T, self.renewal, directed=True, return_predecessors=False
        )
        if leads_home.size != self.size:
            return "Chain is reducible: renewal state not reachable"
        recurrent = np.sort(
            breadth_first_order(
                graph, self.renewal, directed=True, return_predecessors=False
            )
        )
        block = (matrix[np.ix_(recurrent, recurrent)] > 0).astype(float)
        size = recurrent.size
        # Wielandt: a primitive m x m matrix has A^((m-1)^2 + 1) > 0
        if not (np.linalg.matrix_power(block, (size - 1) ** 2 + 1) > 0).all():
            return "Chain is periodic"
        return None

    def check(self):
        self.check_entries()
        error = self.unichain_error()
        if error:
            raise ModelError(error)
        return self


def _gth(matrix, renewal):
    """
    Grassmann-Taksar-Heyman state reduction for a row-stochastic matrix.

    Only sums of positive entries are formed, so nearly decomposable chains
    keep full relative precision. The renewal state is eliminated last.
    """
    n = matrix.shape[0]
    order = [renewal] + [i for i in range(n) if i != renewal]
    a = matrix[np.ix_(order, order)].copy()
    for k in range(n - 1, 0, -1):
        total = a[k, :k].sum()
        a[:k, k] /= total
        a[:k, :k] += np.outer(a[:k, k], a[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ a[:k, k]
    pi /= pi.sum()
    result = np.empty(n)
    result[order] = pi
    return result


def stationary_distribution(fsm):
    """Solve pi T = pi, sum(pi) = 1 by state reduction."""
    fsm.check_entries()
    matrix = np.asarray(fsm.transitions, dtype=float)
    error = fsm.unichain_error()
    if error and fsm.limit is None:
        raise ModelError(error)
    if error:
        pi = np.asarray(fsm.limit, dtype=float)
        if pi.shape != (fsm.size,) or abs(pi.sum() - 1.0) > 1e-12:
            raise ModelError(f"Limit law {pi} is not a distribution")
    else:
        pi = _gth(matrix, fsm.renewal)
    pi = np.where(np.abs(pi) < 1e-15, 0.0, pi)
    if (pi < 0).any():
        raise ModelError(f"Stationary solve produced negative mass {pi}")
    residual = np.abs(pi @ matrix - pi).max()
    if residual > 1e-12:
        raise ModelError(f"Stationary residual {residual:.2e} exceeds 1e-12")
    return pi


@dataclass(frozen=True)
class RenewalSummary:
    cycle_mean: float
    cycle_reward: float
    throughput: float
    power: float


def renewal_reward(fsm):
    """Mean inter-renewal time, reward per cycle and long-term averages."""
    pi = stationary_distribution(fsm)
    matrix = np.asarray(fsm.transitions, dtype=float)
    rewards = np.zeros_like(matrix) if fsm.rewards is None else fsm.rewards
    powers = np.zeros_like(matrix) if fsm.powers is None else fsm.powers
    throughput = float(pi @ (matrix * rewards).sum(axis=1))
    power = float(pi @ (matrix * powers).sum(axis=1))
    cycle_mean = 1.0 / pi[fsm.renewal]
    return RenewalSummary(
        cycle_mean=cycle_mean,
        cycle_reward=throughput * cycle_mean,
        throughput=throughput,
        power=power,
    )


@dataclass(frozen=True)
class AloRenewal:
    cycle_mean: float
    cycle_reward: float
    # Rewards collected on the branches leaving (2,2) and the rest
    right_reward: float
    left_reward: float

    @property
    def throughput(self):
        return self.cycle_reward / self.cycle_mean


def _check_probability(p):
    if np.any((np.asarray(p) < 0.0) | (np.asarray(p) > 1.0)):
        raise DomainError(f"p must be in [0, 1], got {p}")


def alo_renewal_quantities(p, rate):
    """Renewal quantities of the ALO chain; ``p`` and ``rate`` may be arrays."""
    _check_probability(p)
    if np.any(np.asarray(rate) < 0):
        raise DomainError(f"rate must be >= 0, got {rate}")
    right = rate * p * (1.0 - p)
    left = 3.0 * p * rate
    return AloRenewal(
        cycle_mean=4.0 - p,
        cycle_reward=rate * p * (4.0 - p),
        right_reward=right,
        left_reward=left,
    )


def alo_left_branch_series(p, rate, horizon=None, tol=1e-18):
    """
    Partial sum of the left-branch reward over slots tau = 2..horizon.

    The reward accumulated up to slot tau is a binomial sum over the number
    of scheduled slots; it collapses to
    2R (p/2)^2 [2 (1-p/2)^(tau-2) + (tau-2) (1-p/2)^(tau-3) (p/2)].
    With ``horizon=None`` terms are added until they drop below ``tol``.
    """
    _check_probability(p)
    if p == 0.0:
        return 0.0
    half = p / 2.0
    keep = 1.0 - half
    scale = 2.0 * rate * half * half
    total = 0.0
    tau = 2
    while horizon is None or tau <= horizon:
        n = tau - 2
        term = 2.0 * keep**n + (n * keep ** (n - 1) * half if n > 0 else 0.0)
        total += scale * term
        if horizon is None and scale * term < tol and n > 1:
            break
        tau += 1
    return total


def build_alo_fsm(threshold, pbar, users=2):
    """
    Two-user ALO chain for on/off threshold ``threshold``.

    Rewards are the expected decoded rate per transition and powers the
    expected total transmit power, with rate R = ln(1 + K pbar s / p).
    """
    if threshold < 0:
        raise DomainError(f"threshold must be >= 0, got {threshold}")
    if users != 2:
        raise ArgumentError("The closed-form ALO chain is defined for two users")
    p = float(max_fading_survival(users, threshold))
    half = p / 2.0
    transitions = np.array(
        [
            [0.0, half, half, 1.0 - p],
            [half, 0.0, 1.0 - half, 0.0],
            [half, 1.0 - half, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
        ]
    )
    rate = alo_rate(threshold, pbar, p, users)
    active_power = users * pbar / p if p > 0 else 0.0

    # Expected reward and power given each transition
    rewards = np.zeros((4, 4))
    powers = np.zeros((4, 4))
    rewards[0, 1] = rewards[0, 2] = rate
    powers[0, 1] = powers[0, 2] = active_power
    for row, stay in ((1, 2), (2, 1)):
        rewards[row, 0] = rate
        powers[row, 0] = active_power
        if 1.0 - half > 0:
            share = half / (1.0 - half)
            rewards[row, stay] = rate * share
            powers[row, stay] = active_power * share
    rewards[3, 0] = rate * p
    powers[3, 0] = active_power * p
    return FsmModel(
        states=ALO_STATES,
        transitions=transitions,
        renewal=0,
        rewards=rewards,
        powers=powers,
        # p / 2 = 0 splits the chain into two closed classes
        limit=alo_stationary(p) if half == 0.0 else None,
    )


def alo_rate(threshold, pbar, p, users=2):
    if p <= 0:
        return 0.0
    return math.log1p(users * pbar * threshold / p)


def alo_stationary(p):
    """Stationary law of the ALO chain over ALO_STATES."""
    _check_probability(p)
    return np.array([1.0, 1.0, 1.0, 1.0 - p]) / (4.0 - p)
