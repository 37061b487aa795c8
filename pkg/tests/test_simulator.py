import math

import numpy as np
import pytest

from harq_mac.constants import (
    ACCUMULATE,
    CDTDMA_ALO,
    CDTDMA_INR,
    CDTDMA_ONOFF,
    DEEP_FADE_MODES,
    LAST_CHANCE,
    MULTILEVEL_CDTDMA,
    POLICIES,
    SILENT,
)
from harq_mac.exceptions import (
    ArgumentError,
    ConfigurationError,
    DomainError,
    ModelError,
)
from harq_mac.items import InrLevels, PolicyParams, SystemSpec
from harq_mac.policies.alo import cdtdma_alo
from harq_mac.policies.cdtdma import cdtdma_onoff
from harq_mac.policies.inr import CdTdmaInrPolicy, cdtdma_inr
from harq_mac.policies.joint_decoding import joint_decoding_sym
from harq_mac.policies.multilevel import multilevel_cdtdma
from harq_mac.policies.static_tdma import static_tdma
from harq_mac.registry import create_policy
from harq_mac.settings import get_settings
from harq_mac.simulator import (
    MIN_SIM_SLOTS,
    Agreement,
    batch_ratio,
    compare,
    inr_choice,
    inr_quantize,
    inr_single_user,
    renewal_statistics,
    restore_budget,
    run_packets,
    simulate,
)
from harq_mac.special import FadingModel, db_to_linear, spawn_rng

settings = get_settings("harq_mac.settings.quick")

SLOTS = 100_000
SEED = 2011
# Four standard errors; reported half-widths are three
FOUR_SIGMA = 4.0 / 3.0

system = SystemSpec(users=2, pbar=1.0)

static_point = static_tdma(2, 1.0, settings=settings)
static_report = simulate(system, static_point.params, SLOTS, SEED, settings)

onoff_point = cdtdma_onoff(2, 1.0, settings=settings)
onoff_report = simulate(system, onoff_point.params, SLOTS, SEED, settings)

alo_system = SystemSpec(users=2, attempts=2, pbar=1.0)
alo_point = cdtdma_alo(1.0, attempts=2, settings=settings)
alo_report = simulate(alo_system, alo_point.params, SLOTS, SEED, settings)

inr_levels = InrLevels(rate=1.0, powers=((0.5, 1.5, 4.0), (1.0, 2.0, 6.0)))


def test_static_tdma_agrees():
    """Test that simulated static TDMA matches its closed form and budget."""
    agreement = compare(static_point, static_report, 1.0, FOUR_SIGMA)
    assert agreement.agree
    # the owner spends K P every slot
    assert static_report.power_est == pytest.approx(1.0, rel=1e-12)
    assert static_report.renewals == SLOTS


def test_onoff_agrees():
    """Test that simulated on/off matches its closed form and budget."""
    assert compare(onoff_point, onoff_report, 1.0, FOUR_SIGMA).agree


def test_feedback_histogram():
    """Test that the histogram covers every slot on the policy alphabet."""
    histogram = onoff_report.feedback_histogram
    assert len(histogram) == 3
    assert sum(histogram) == SLOTS
    p = onoff_point.details["on_probability"]
    assert (SLOTS - histogram[0]) / SLOTS == pytest.approx(p, abs=0.01)
    assert static_report.feedback_histogram == (SLOTS,)


def test_power_per_user():
    """Test that users share the power evenly."""
    first, second = onoff_report.power_per_user
    assert first == pytest.approx(second, rel=0.05)
    assert (first + second) / 2 == pytest.approx(onoff_report.power_est, rel=1e-9)


def test_alo_agrees():
    """Test that simulated ALO matches R p and the renewal time 4 - p."""
    p = alo_point.details["on_probability"]
    assert compare(alo_point, alo_report, 1.0, FOUR_SIGMA).agree
    assert abs(alo_report.cycle_mean - (4.0 - p)) <= (
        FOUR_SIGMA * alo_report.ci_halfwidth_cycle
    )


def test_alo_occupancy():
    """Test that the chain visits only its four states."""
    occupancy = alo_report.occupancy
    assert set(occupancy) <= {(1, 1), (1, 2), (2, 1), (2, 2)}
    assert sum(occupancy.values()) == pytest.approx(1.0)
    p = alo_point.details["on_probability"]
    assert occupancy[(1, 1)] == pytest.approx(1.0 / (4.0 - p), abs=0.01)


def test_joint_decoding_agrees():
    """Test that simulated joint decoding matches its closed form."""
    point = joint_decoding_sym(1.0, settings=settings)
    report = simulate(system, point.params, SLOTS, SEED, settings)
    assert compare(point, report, 1.0, FOUR_SIGMA).agree


def test_multilevel_agrees():
    """Test that simulated multilevel scheduling matches its closed form."""
    point = multilevel_cdtdma(2, 1.0, 3, settings=settings)
    report = simulate(system, point.params, SLOTS, SEED, settings)
    assert compare(point, report, 1.0, FOUR_SIGMA).agree
    assert len(report.feedback_histogram) == 7


def test_determinism():
    """Test that a fixed seed reproduces the report."""
    again = simulate(system, onoff_point.params, SLOTS, SEED, settings)
    assert again == onoff_report
    other = simulate(system, onoff_point.params, SLOTS, SEED + 1, settings)
    assert other.throughput_est != onoff_report.throughput_est


def test_simulate_errors():
    """Test that bad runs are refused."""
    for slots in (0, MIN_SIM_SLOTS - 1):
        with pytest.raises(DomainError):
            simulate(system, onoff_point.params, slots, SEED, settings)
    with pytest.raises(ConfigurationError):
        simulate(
            system, PolicyParams(policy=CDTDMA_ONOFF), MIN_SIM_SLOTS, SEED, settings
        )
    with pytest.raises(ConfigurationError):
        simulate(system, PolicyParams(policy="aloha"), MIN_SIM_SLOTS, SEED, settings)


def test_batch_ratio():
    """Test the ratio estimate and its half-width."""
    interval = batch_ratio(np.full(100, 2.0), np.ones(100), 10, 3.0)
    assert interval.estimate == 2.0
    assert interval.halfwidth == 0.0
    assert math.isnan(batch_ratio([1.0], [1.0], 10, 3.0).halfwidth)


def test_renewal_statistics():
    """Test cycle statistics on a hand-built sequence."""
    rewards = np.array([1.0, 0.0, 1.0, 0.0, 0.0, 1.0])
    renewals = np.array([True, False, True, False, False, True])
    stats = renewal_statistics(rewards, np.ones(6), renewals, 2, 3.0)
    assert stats["renewals"] == 3
    assert stats["throughput"].estimate == 0.5
    assert stats["cycle"].estimate == 2.5
    with pytest.raises(ModelError):
        renewal_statistics(rewards, np.ones(6), ~renewals, 2, 3.0)


def test_agreement():
    """Test the verdict of a comparison."""
    agreement = Agreement(0.01, 0.02, 0.0, 0.01)
    assert agreement.verdict == "AGREE"
    assert Agreement(0.03, 0.02, 0.0, 0.01).verdict == "DISAGREE"
    assert Agreement(0.0, 0.02, -0.5, 0.01, budget_is_cap=True).agree
    assert not Agreement(0.0, 0.02, -0.5, 0.01).agree


@pytest.mark.parametrize("mode", DEEP_FADE_MODES)
@pytest.mark.parametrize("final", [False, True])
def test_inr_quantizers_agree(mode, final):
    """Test that the scalar and vectorized quantizers agree."""
    inr = InrLevels(rate=1.0, powers=((0.5, 1.5, 4.0),), windows=(2.0,))
    needed = spawn_rng(3).exponential(3.0, 500)
    level, power = inr_quantize(inr, 0, needed, final, mode)
    for index, value in enumerate(needed.tolist()):
        assert (level[index], power[index]) == inr_choice(inr, 0, value, final, mode)


def test_inr_choice_modes():
    """Test the deep-fade behaviour of each mode."""
    inr = InrLevels(rate=1.0, powers=((1.0, 2.0),), windows=(3.0,))
    assert inr_choice(inr, 0, 0.5, False) == (1, 1.0)
    assert inr_choice(inr, 0, 2.0, False) == (2, 2.0)
    assert inr_choice(inr, 0, 5.0, False, ACCUMULATE) == (2, 2.0)
    assert inr_choice(inr, 0, 7.0, False, ACCUMULATE) == (0, 0.0)
    assert inr_choice(inr, 0, 5.0, False, SILENT) == (0, 0.0)
    assert inr_choice(inr, 0, 5.0, True, LAST_CHANCE) == (2, 2.0)
    assert inr_choice(inr, 0, 5.0, False, LAST_CHANCE) == (0, 0.0)


def test_run_packets_accounting():
    """Test per-packet slots, rewards and feedback counts."""
    gains = spawn_rng(4).standard_exponential((10_000, 2))
    outcome = run_packets(gains, inr_levels, LAST_CHANCE)
    assert np.all((outcome.slots >= 1) & (outcome.slots <= 2))
    assert set(np.unique(outcome.rewards)) <= {0.0, 1.0}
    assert outcome.symbols.sum() == outcome.slots.sum()
    assert outcome.attempt_slots.tolist() == [
        10_000,
        int((outcome.slots == 2).sum()),
    ]


def test_run_packets_shape():
    """Test that gains must have one column per attempt."""
    with pytest.raises(ConfigurationError):
        run_packets(np.ones((5, 3)), inr_levels)


@pytest.mark.parametrize("mode", [SILENT, ACCUMULATE])
def test_inr_single_attempt_is_onoff(mode):
    """Test that one attempt with one level reproduces on/off."""
    point = cdtdma_onoff(1, 1.0, settings=settings)
    s = point.params.threshold
    rate = point.params.rate
    inr = InrLevels(rate=rate, powers=((math.expm1(rate) / s,),))
    report = inr_single_user(inr, FadingModel(), SLOTS, SEED, mode, settings)
    assert report.agrees(point.throughput, FOUR_SIGMA)
    band = FOUR_SIGMA * report.ci_halfwidth_power
    assert report.power_est == pytest.approx(1.0, abs=band)


def test_inr_single_attempt_last_chance():
    """Test that the last-chance default sends P_L in every deep fade."""
    point = cdtdma_onoff(1, 1.0, settings=settings)
    s = point.params.threshold
    rate = point.params.rate
    inr = InrLevels(rate=rate, powers=((math.expm1(rate) / s,),))
    report = inr_single_user(inr, FadingModel(), SLOTS, SEED, settings=settings)
    assert report.agrees(point.throughput, FOUR_SIGMA)
    # P_L = 1 / Pr[g > s] is spent in every slot
    assert report.power_est == pytest.approx(math.exp(s), rel=1e-9)


def test_default_deep_fade_mode():
    """Test that a deep fade at the last attempt sends the top level by default."""
    assert settings["INR_DEEP_FADE"] == LAST_CHANCE
    spec = SystemSpec(users=2, attempts=2, pbar=1.0)
    assert CdTdmaInrPolicy(spec, levels=3, settings=settings).mode == LAST_CHANCE
    assert inr_choice(inr_levels, 1, 50.0, True) == (3, 6.0)
    outcome = run_packets(np.full((1, 2), 1e-9), inr_levels)
    # silent first attempt, then a top-level transmission that cannot decode
    assert outcome.slots.tolist() == [2]
    assert outcome.energy.tolist() == [6.0]
    assert outcome.rewards.tolist() == [0.0]
    assert outcome.symbols.tolist() == [1, 0, 0, 1]


def test_inr_single_user_report():
    """Test the single-user report layout."""
    report = inr_single_user(
        inr_levels, FadingModel(), 20_000, SEED, settings=settings
    )
    assert report.slots >= 20_000
    assert len(report.feedback_histogram) == 4
    assert set(report.occupancy) == {(1,), (2,)}
    with pytest.raises(DomainError):
        inr_single_user(inr_levels, FadingModel(), 0, SEED, settings=settings)
    with pytest.raises(ArgumentError):
        inr_single_user(inr_levels, FadingModel(), 100, SEED, "eager", settings)


def test_restore_budget():
    """Test that scaling brings the spent power under the budget."""
    inr = InrLevels(rate=1.0, powers=((5.0, 10.0),))
    gains = spawn_rng(6).standard_exponential((20_000, 1))
    restored = restore_budget(inr, gains, 1.0)
    spent = run_packets(gains, restored)
    assert spent.energy.sum() <= spent.slots.sum()
    assert restored.powers[0][1] / restored.powers[0][0] == pytest.approx(2.0)


def test_inr_multiuser_matches_single_user():
    """Test that K users under the ownership clock see single-user INR."""
    spec = SystemSpec(users=2, attempts=2, pbar=1.0)
    policy = CdTdmaInrPolicy(spec, levels=2, settings=settings)
    inr = InrLevels(rate=1.2, powers=((1.0, 3.0), (1.5, 4.0)), windows=(1.5,))
    params = PolicyParams(policy=CDTDMA_INR, levels=2, rate=inr.rate, inr=inr)
    multi = simulate(spec, params, SLOTS, SEED, settings)
    single = inr_single_user(
        inr, policy.strongest_fading, SLOTS, SEED + 1, policy.mode, settings
    )
    band = FOUR_SIGMA * math.hypot(
        multi.ci_halfwidth_throughput, single.ci_halfwidth_throughput
    )
    assert abs(multi.throughput_est - single.throughput_est) <= band
    # simulate reports per-user power, the single-user run the total
    power_band = FOUR_SIGMA * math.hypot(
        2 * multi.ci_halfwidth_power, single.ci_halfwidth_power
    )
    assert abs(2 * multi.power_est - single.power_est) <= power_band
    assert len(multi.feedback_histogram) == 5


def test_inr_params_mismatch():
    """Test that levels of another shape are refused."""
    spec = SystemSpec(users=2, attempts=2, pbar=1.0)
    params = PolicyParams(
        policy=CDTDMA_INR,
        levels=2,
        rate=1.0,
        inr=InrLevels(rate=1.0, powers=((1.0, 2.0),)),
    )
    with pytest.raises(ConfigurationError):
        simulate(spec, params, MIN_SIM_SLOTS, SEED, settings)


@pytest.mark.slow
def test_inr_optimum():
    """Test the optimized INR policy against multilevel scheduling and the budget."""
    accumulate = settings.copy_with(INR_DEEP_FADE=ACCUMULATE)
    spec = SystemSpec(users=2, attempts=2, pbar=10.0)
    point = CdTdmaInrPolicy(spec, levels=3, settings=accumulate).optimize()
    multilevel = multilevel_cdtdma(2, 10.0, 3, settings=settings).throughput
    assert point.details["multilevel"] == pytest.approx(multilevel, rel=1e-12)
    assert point.throughput >= multilevel - point.report.ci_halfwidth_throughput
    report = simulate(spec, point.params, SLOTS, SEED, accumulate)
    assert compare(point, report, spec.pbar, FOUR_SIGMA).agree


@pytest.mark.slow
@pytest.mark.parametrize("snr_db", [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0])
def test_inr_normalized_floor(snr_db):
    """Test the INR floor over the SNR sweep with seven feedback symbols."""
    accumulate = settings.copy_with(INR_DEEP_FADE=ACCUMULATE)
    spec = SystemSpec(users=2, attempts=2, pbar=db_to_linear(snr_db))
    policy = CdTdmaInrPolicy(spec, levels=3, settings=accumulate)
    assert policy.feedback_size() == 7
    point = policy.optimize()
    assert point.normalized >= 0.83
    band = point.report.ci_halfwidth_throughput
    assert point.throughput >= point.details["multilevel"] - band


# (attempts, levels) where a policy needs more than one
SHAPES = {CDTDMA_ALO: (2, 1), MULTILEVEL_CDTDMA: (1, 3), CDTDMA_INR: (2, 2)}


@pytest.mark.slow
@pytest.mark.parametrize("name", POLICIES)
@pytest.mark.parametrize("snr_db", [-10.0, 0.0, 10.0, 20.0])
def test_agreement_across_snr(name, snr_db):
    """Test every policy's optimum against simulation across the SNR range."""
    attempts, levels = SHAPES.get(name, (1, 1))
    spec = SystemSpec(users=2, attempts=attempts, pbar=db_to_linear(snr_db))
    point = create_policy(name, spec, levels, settings).optimize()
    report = simulate(spec, point.params, 1_000_000, SEED, settings)
    # slot schedules round tau to whole slots
    agreement = compare(point, report, spec.pbar, FOUR_SIGMA, power_atol=1e-5)
    assert agreement.throughput_ok
    if point.report is None:
        assert agreement.power_ok
    else:
        # levels were fitted to the budget on their own draws
        band = FOUR_SIGMA * math.hypot(
            report.ci_halfwidth_power, point.report.ci_halfwidth_power / spec.users
        )
        assert report.power_est <= spec.pbar * (1.0 + 1e-5) + band


@pytest.mark.slow
@pytest.mark.parametrize("snr_db", [-10.0, 0.0, 10.0, 20.0])
def test_inr_one_user_one_attempt_is_onoff(snr_db):
    """Test that one user with one attempt and one level is the on/off policy."""
    pbar = db_to_linear(snr_db)
    point = cdtdma_inr(1, 1, 1, pbar, settings=settings)
    onoff = cdtdma_onoff(1, pbar, settings=settings)
    assert len(point.params.inr.powers) == 1
    level = point.params.inr.powers[0][0]
    assert level == pytest.approx(
        math.expm1(onoff.params.rate) / onoff.params.threshold, rel=1e-9
    )
    assert point.params.rate == pytest.approx(onoff.params.rate, rel=1e-12)
    band = FOUR_SIGMA * point.report.ci_halfwidth_throughput
    assert abs(point.throughput - onoff.throughput) <= band


def test_multilevel_symbols():
    """Test that multilevel feedback encodes level and user."""
    point = multilevel_cdtdma(2, 1.0, 3, settings=settings)
    multilevel = create_policy(MULTILEVEL_CDTDMA, system, 3, settings)
    gains = np.array([[1000.0, 0.0], [0.0, 1000.0], [0.0, 0.0]])
    result = multilevel.run_chunk(gains, point.params, multilevel.start(point.params))
    assert result.symbols.tolist() == [3, 6, 0]
    assert result.rewards[0, 0] == pytest.approx(point.params.rate)
