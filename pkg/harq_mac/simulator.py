"""
Slot-level Monte Carlo of the policies.

``simulate`` draws fading block by block, lets the policy turn each block
into feedback symbols, powers and decoded rates, and reports long-term
averages with batch-means confidence half-widths over renewal cycles. A
renewal is a slot at which every user starts a fresh packet.

``inr_single_user`` and ``optimize_inr_levels`` work on the single-user
incremental redundancy protocol seen by the strongest user, packet by
packet and vectorized over packets.
"""

import bisect
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from harq_mac.constants import ACCUMULATE, DEEP_FADE_MODES, LAST_CHANCE
from harq_mac.exceptions import (
    ArgumentError,
    ConfigurationError,
    DomainError,
    ModelError,
)
from harq_mac.items import InrLevels, SimReport
from harq_mac.mixins import DECODE_RTOL
from harq_mac.optimizer import OptimizerConfig, maximize_nd
from harq_mac.registry import create_policy
from harq_mac.settings import get_settings
from harq_mac.special import spawn_rng

logger = logging.getLogger(__name__)

# Exponent range of the log-parametrized INR levels; keeps neighbours distinct
LOG_MIN, LOG_MAX = -20.0, 12.0
# Window of the warm start, close to the plain quantizer
WARM_WINDOW_LOG = -8.0
BUDGET_BISECTIONS = 40
# Shortest run with meaningful batch-means half-widths
MIN_SIM_SLOTS = 10_000


@dataclass(frozen=True)
class Interval:
    estimate: float
    halfwidth: float


def batch_ratio(numerators, denominators, batches, sigmas):
    """
    Ratio estimate sum(num) / sum(den) with a batch-means half-width.

    Consecutive cycles are grouped into ``batches`` batches; the half-width
    is ``sigmas`` standard errors of the batch ratios.
    """
    numerators = np.asarray(numerators, dtype=float)
    denominators = np.asarray(denominators, dtype=float)
    total = denominators.sum()
    estimate = numerators.sum() / total if total > 0 else math.nan
    count = min(batches, numerators.size)
    if count < 2:
        return Interval(estimate, math.nan)
    ratios = np.array(
        [
            numerators[index].sum() / denominators[index].sum()
            for index in np.array_split(np.arange(numerators.size), count)
        ]
    )
    return Interval(estimate, sigmas * ratios.std(ddof=1) / math.sqrt(count))


def renewal_statistics(rewards, energy, renewals, batches, sigmas):
    """
    Cycle-based intervals for throughput, power and cycle length.

    ``rewards`` and ``energy`` are per-slot totals; ``renewals`` flags the
    first slot of every cycle. The trailing incomplete cycle only enters the
    point estimates.
    """
    slots = rewards.size
    starts = np.flatnonzero(renewals)
    if starts.size == 0 or starts[0] != 0:
        raise ModelError("The first simulated slot must be a renewal")
    lengths = np.diff(starts)
    cycle_rewards = np.add.reduceat(rewards, starts)[:-1]
    cycle_energy = np.add.reduceat(energy, starts)[:-1]

    throughput = batch_ratio(cycle_rewards, lengths, batches, sigmas)
    power = batch_ratio(cycle_energy, lengths, batches, sigmas)
    cycle = batch_ratio(lengths, np.ones_like(lengths), batches, sigmas)
    if lengths.size < batches:
        logger.warning(
            f"Only {lengths.size} complete renewal cycles in {slots} slots; "
            f"confidence half-widths are unreliable"
        )
    return {
        "throughput": Interval(rewards.sum() / slots, throughput.halfwidth),
        "power": Interval(energy.sum() / slots, power.halfwidth),
        "cycle": cycle,
        "renewals": int(starts.size),
    }


def _check_slots(slots):
    if slots < MIN_SIM_SLOTS:
        raise DomainError(f"slots must be >= {MIN_SIM_SLOTS}, got {slots}")


def _occupancy(counts, slots):
    return {state: count / slots for state, count in sorted(counts.items())}


def simulate(spec, params, slots=None, seed=None, settings=None):
    """
    Long-term throughput and power of ``params`` on the system ``spec``.

    Throughput is the total decoded rate per slot summed over users; power
    is the average per-user power, to be compared with ``spec.pbar``.
    """
    settings = settings or get_settings()
    slots = settings.getint("SIM_SLOTS") if slots is None else slots
    seed = settings.getint("SIM_SEED") if seed is None else seed
    _check_slots(slots)
    policy = create_policy(params.policy, spec, levels=params.levels, settings=settings)
    policy.check_params(params)
    feedback = spec.feedback or policy.feedback_size()
    chunk = settings.getint("SIM_CHUNK_SLOTS", 100_000)

    rng = spawn_rng(seed)
    state = policy.start(params)
    rewards, energy, renewals = [], [], []
    per_user = np.zeros(spec.users)
    histogram = np.zeros(feedback, dtype=np.int64)
    counts = {}
    done = 0
    while done < slots:
        size = min(chunk, slots - done)
        gains = spec.fading.sample(rng, (size, spec.users))
        result = policy.run_chunk(gains, params, state)
        if result.symbols.size and result.symbols.max() >= feedback:
            raise ModelError(
                f"{policy.name} emitted symbol {result.symbols.max()} with F={feedback}"
            )
        histogram += np.bincount(result.symbols, minlength=feedback)
        rewards.append(result.rewards.sum(axis=1))
        energy.append(result.powers.sum(axis=1) / spec.users)
        per_user += result.powers.sum(axis=0)
        renewals.append((result.attempts == 1).all(axis=1))
        rows, row_counts = np.unique(result.attempts, axis=0, return_counts=True)
        for row, count in zip(map(tuple, rows.tolist()), row_counts.tolist()):
            counts[row] = counts.get(row, 0) + count
        done += size

    stats = renewal_statistics(
        np.concatenate(rewards),
        np.concatenate(energy),
        np.concatenate(renewals),
        settings.getint("SIM_BATCHES", 50),
        settings.getfloat("CONFIDENCE_SIGMAS", 3.0),
    )
    report = SimReport(
        throughput_est=stats["throughput"].estimate,
        power_est=stats["power"].estimate,
        ci_halfwidth_throughput=stats["throughput"].halfwidth,
        ci_halfwidth_power=stats["power"].halfwidth,
        renewals=stats["renewals"],
        slots=slots,
        feedback_histogram=tuple(int(c) for c in histogram),
        power_per_user=tuple(float(p) for p in per_user / slots),
        cycle_mean=stats["cycle"].estimate,
        ci_halfwidth_cycle=stats["cycle"].halfwidth,
        occupancy=_occupancy(counts, slots),
    )
    logger.debug(
        f"{policy.name}: {report.throughput_est:.6f} +/- "
        f"{report.ci_halfwidth_throughput:.2e} nats/slot over {slots} slots"
    )
    return report


# Incremental redundancy


def _check_mode(mode):
    if mode not in DEEP_FADE_MODES:
        raise ArgumentError(
            f"Unknown deep-fade mode {mode!r}, expected one of {DEEP_FADE_MODES}"
        )


def inr_choice(inr, attempt, needed, final, mode=LAST_CHANCE):
    """
    (level, power) for one attempt; level 0 means silent.

    ``attempt`` is 0-based and ``needed`` is the power that would finish the
    packet in this slot. The smallest level at or above it is sent; past the
    top level the deep-fade ``mode`` decides.
    """
    levels = inr.powers[attempt]
    index = bisect.bisect_left(levels, needed)
    if index < len(levels):
        return index + 1, levels[index]
    top = len(levels)
    if mode == ACCUMULATE and not final and needed <= inr.window(attempt) * levels[-1]:
        return top, levels[-1]
    if mode == LAST_CHANCE and final:
        return top, levels[-1]
    return 0, 0.0


def inr_quantize(inr, attempt, needed, final, mode=LAST_CHANCE):
    """Vectorized ``inr_choice`` over an array of needed powers."""
    levels = np.asarray(inr.powers[attempt], dtype=float)
    top = levels.size
    index = np.searchsorted(levels, needed, side="left")
    finish = index < top
    level = np.where(finish, index + 1, 0)
    power = np.where(finish, levels[np.minimum(index, top - 1)], 0.0)
    if mode == ACCUMULATE and not final:
        partial = ~finish & (needed <= inr.window(attempt) * levels[-1])
    elif mode == LAST_CHANCE and final:
        partial = ~finish
    else:
        partial = np.zeros_like(finish)
    level[partial] = top
    power[partial] = levels[-1]
    return level, power


def needed_power(deficit, gain):
    """Power closing an information deficit in one slot, (e^D - 1) / g."""
    with np.errstate(divide="ignore"):
        return np.expm1(deficit) / gain


@dataclass
class PacketOutcome:
    rewards: np.ndarray
    slots: np.ndarray
    energy: np.ndarray
    symbols: np.ndarray
    attempt_slots: np.ndarray


def run_packets(gains, inr, mode=LAST_CHANCE):
    """
    Single-user incremental redundancy, one row of ``gains`` per packet.

    Column m holds the gain of attempt m + 1. A packet stops when the
    accumulated mutual information reaches the rate or after the last
    column.
    """
    packets, attempts = gains.shape
    if attempts != inr.attempts:
        raise ConfigurationError(
            f"Gains have {attempts} attempts, levels define {inr.attempts}"
        )
    rate = inr.rate
    info = np.zeros(packets)
    active = np.ones(packets, dtype=bool)
    rewards = np.zeros(packets)
    used = np.zeros(packets, dtype=np.int64)
    energy = np.zeros(packets)
    symbols = np.zeros(inr.levels + 1, dtype=np.int64)
    attempt_slots = np.zeros(attempts, dtype=np.int64)
    for attempt in range(attempts):
        index = np.flatnonzero(active)
        if index.size == 0:
            break
        gain = gains[index, attempt]
        level, power = inr_quantize(
            inr,
            attempt,
            needed_power(rate - info[index], gain),
            attempt == attempts - 1,
            mode,
        )
        info[index] += np.log1p(gain * power)
        used[index] += 1
        energy[index] += power
        symbols += np.bincount(level, minlength=inr.levels + 1)
        attempt_slots[attempt] = index.size
        done = info[index] >= rate * (1.0 - DECODE_RTOL)
        rewards[index[done]] = rate
        active[index[done]] = False
    return PacketOutcome(rewards, used, energy, symbols, attempt_slots)


def inr_single_user(inr, fading, slots, seed, mode=LAST_CHANCE, settings=None):
    """
    Simulate packets until ``slots`` slots are used.

    Every packet is a renewal cycle. ``report.slots`` is the number of slots
    actually simulated, which may exceed ``slots`` by less than M.
    """
    settings = settings or get_settings()
    _check_mode(mode)
    _check_slots(slots)
    rng = spawn_rng(seed)
    chunk = settings.getint("SIM_CHUNK_SLOTS", 100_000)
    outcomes = []
    used = 0
    while used < slots:
        packets = min(chunk, max(1, -(-(slots - used) // inr.attempts)))
        outcome = run_packets(fading.sample(rng, (packets, inr.attempts)), inr, mode)
        outcomes.append(outcome)
        used += int(outcome.slots.sum())

    rewards = np.concatenate([o.rewards for o in outcomes])
    lengths = np.concatenate([o.slots for o in outcomes])
    energy = np.concatenate([o.energy for o in outcomes])
    batches = settings.getint("SIM_BATCHES", 50)
    sigmas = settings.getfloat("CONFIDENCE_SIGMAS", 3.0)
    throughput = batch_ratio(rewards, lengths, batches, sigmas)
    power = batch_ratio(energy, lengths, batches, sigmas)
    cycle = batch_ratio(lengths, np.ones_like(lengths), batches, sigmas)
    attempt_slots = sum(o.attempt_slots for o in outcomes)
    return SimReport(
        throughput_est=throughput.estimate,
        power_est=power.estimate,
        ci_halfwidth_throughput=throughput.halfwidth,
        ci_halfwidth_power=power.halfwidth,
        renewals=int(lengths.size),
        slots=used,
        feedback_histogram=tuple(int(c) for c in sum(o.symbols for o in outcomes)),
        power_per_user=(power.estimate,),
        cycle_mean=cycle.estimate,
        ci_halfwidth_cycle=cycle.halfwidth,
        occupancy={
            (attempt + 1,): count / used
            for attempt, count in enumerate(attempt_slots.tolist())
        },
    )


class InrLayout:
    """
    Unconstrained coordinates of an InrLevels.

    x[0] = ln R; per attempt L entries for P_1 = e^x and P_(l+1) - P_l =
    e^x; then one ln(w - 1) per non-final attempt when windows are used.
    """

    def __init__(self, attempts, levels, windows):
        self.attempts = attempts
        self.levels = levels
        self.windows = attempts - 1 if windows else 0

    @property
    def dim(self):
        return 1 + self.attempts * self.levels + self.windows

    def decode(self, x):
        x = np.clip(np.asarray(x, dtype=float), LOG_MIN, LOG_MAX)
        steps = x[1 : 1 + self.attempts * self.levels].reshape(
            self.attempts, self.levels
        )
        powers = np.cumsum(np.exp(steps), axis=1)
        windows = 1.0 + np.exp(x[1 + self.attempts * self.levels :])
        return InrLevels(
            rate=float(np.exp(x[0])),
            powers=tuple(tuple(float(p) for p in row) for row in powers),
            windows=tuple(float(w) for w in windows),
        )

    def encode(self, inr):
        powers = np.asarray(inr.powers, dtype=float)
        steps = np.log(np.diff(powers, axis=1, prepend=0.0))
        windows = [
            math.log(max(inr.window(m) - 1.0, math.exp(WARM_WINDOW_LOG)))
            for m in range(self.windows)
        ]
        return np.concatenate([[math.log(inr.rate)], steps.ravel(), windows])


def _scaled(inr, factor):
    return replace(
        inr, powers=tuple(tuple(p * factor for p in row) for row in inr.powers)
    )


def restore_budget(inr, gains, power, mode=LAST_CHANCE):
    """Scale all levels down until the estimated power meets ``power``."""
    spent = run_packets(gains, inr, mode)
    if spent.energy.sum() <= power * spent.slots.sum() * (1.0 + 1e-9):
        return inr
    lo, hi = 0.0, 1.0
    for _ in range(BUDGET_BISECTIONS):
        mid = 0.5 * (lo + hi)
        spent = run_packets(gains, _scaled(inr, mid), mode)
        if spent.energy.sum() <= power * spent.slots.sum():
            lo = mid
        else:
            hi = mid
    if lo == 0:
        logger.warning(f"INR levels cannot be scaled to meet power {power}")
        return inr
    logger.debug(f"INR levels scaled by {lo:.6f} to meet power {power}")
    return _scaled(inr, lo)


def optimize_inr_levels(
    attempts,
    levels,
    power,
    fading,
    packets=None,
    seed=None,
    start=None,
    mode=None,
    settings=None,
):
    """
    Search the rate, per-attempt power levels and windows of single-user INR.

    The objective is the packet-simulation throughput on a fixed set of
    ``packets`` fading draws, minus INR_PENALTY times the relative power
    overshoot. ``start`` seeds the search, usually the multilevel optimum.
    Returns (InrLevels, throughput on the fixed draws).
    """
    settings = settings or get_settings()
    mode = mode or settings.get("INR_DEEP_FADE", LAST_CHANCE)
    _check_mode(mode)
    if power <= 0:
        raise ArgumentError(f"power must be > 0, got {power}")
    packets = packets or settings.getint("INR_SIM_BUDGET", 100_000)
    seed = settings.getint("OPTIMIZER_SEED") if seed is None else seed
    penalty = settings.getfloat("INR_PENALTY", 50.0)
    gains = fading.sample(spawn_rng(seed, attempts, levels), (packets, attempts))
    layout = InrLayout(attempts, levels, windows=mode == ACCUMULATE)

    def objective(x):
        outcome = run_packets(gains, layout.decode(x), mode)
        used = outcome.slots.sum()
        throughput = outcome.rewards.sum() / used
        overshoot = outcome.energy.sum() / used / power - 1.0
        return throughput - penalty * max(overshoot, 0.0)

    starts = [layout.encode(start)] if start is not None else []
    centre = starts[0] if starts else np.zeros(layout.dim)
    config = replace(
        OptimizerConfig.from_settings(settings),
        nd_restarts=settings.getint("INR_RESTARTS", 4),
        nd_max_iters=settings.getint("INR_MAX_ITERS", 600),
        refine_tol=1e-6,
    )
    x, _ = maximize_nd(
        objective,
        layout.dim,
        init_box=[(c - 1.0, c + 1.0) for c in centre],
        config=config,
        starts=starts,
    )
    inr = restore_budget(layout.decode(x), gains, power, mode)
    outcome = run_packets(gains, inr, mode)
    return inr, float(outcome.rewards.sum() / outcome.slots.sum())


# Verification


@dataclass(frozen=True)
class Agreement:
    throughput_gap: float
    throughput_band: float
    power_gap: float
    power_band: float
    budget_is_cap: bool = False

    @property
    def throughput_ok(self):
        return abs(self.throughput_gap) <= self.throughput_band

    @property
    def power_ok(self):
        if self.budget_is_cap:
            return self.power_gap <= self.power_band
        return abs(self.power_gap) <= self.power_band

    @property
    def agree(self):
        return self.throughput_ok and self.power_ok

    @property
    def verdict(self):
        return "AGREE" if self.agree else "DISAGREE"


def compare(point, report, budget, sigmas_scale=1.0, power_atol=1e-9):
    """
    Check a simulation against an optimized point and the per-user budget.

    Simulated optima (those carrying their own report) widen the throughput
    band by their own half-width and treat the budget as a cap.
    """
    reference = point.report.ci_halfwidth_throughput if point.report else 0.0
    band = math.hypot(report.ci_halfwidth_throughput, reference)
    return Agreement(
        throughput_gap=report.throughput_est - point.throughput,
        throughput_band=sigmas_scale * band,
        power_gap=report.power_est - budget,
        power_band=sigmas_scale * report.ci_halfwidth_power
        + power_atol * max(budget, 1.0),
        budget_is_cap=point.report is not None,
    )
