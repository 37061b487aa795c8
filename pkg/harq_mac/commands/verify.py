"""
Analytic optimum against simulation for every policy, plus the identities
tying the ALO chain to the on/off policy.
"""

from harq_mac.commands import HarqCommand, pbar_from_db
from harq_mac.constants import (
    CDTDMA_ALO,
    CDTDMA_INR,
    CDTDMA_ON,
    CDTDMA_ONOFF,
    JOINT_DECODING,
    JOINT_PLUS_TDMA,
    MULTILEVEL_CDTDMA,
    POLICIES,
    STATIC_TDMA,
)
from harq_mac.exceptions import VerificationError
from harq_mac.items import SystemSpec
from harq_mac.markov import (
    alo_left_branch_series,
    build_alo_fsm,
    stationary_distribution,
)
from harq_mac.registry import create_policy
from harq_mac.simulator import compare, simulate

VERIFY_SNRS = (-10.0, 0.0, 10.0, 20.0)

# Configuration for each verified policy
verify_configs = [
    {"policy": STATIC_TDMA, "users": 2},
    {"policy": JOINT_DECODING, "users": 2},
    {"policy": JOINT_PLUS_TDMA, "users": 2},
    {"policy": CDTDMA_ON, "users": 2},
    {"policy": CDTDMA_ONOFF, "users": 2},
    {"policy": MULTILEVEL_CDTDMA, "users": 2, "levels": 3},
    {"policy": CDTDMA_ALO, "users": 2, "attempts": 2},
    {"policy": CDTDMA_INR, "users": 2, "attempts": 2, "levels": 3},
]

ALO_MATCH_TOL = 1e-9
RENEWAL_TOL = 1e-12
SERIES_TOL = 1e-9
SERIES_MIN_P = 0.05


def alo_identities(alo_point, onoff_point, report):
    """Name -> (ok, detail) for the ALO identities at one SNR."""
    s = alo_point.params.threshold
    p = alo_point.details["on_probability"]
    rate = alo_point.params.rate
    fsm = build_alo_fsm(s, alo_point.avg_power)
    renewal = float(stationary_distribution(fsm)[fsm.renewal])
    gap = abs(alo_point.throughput - onoff_point.throughput)
    checks = {
        "alo_equals_onoff": (gap <= ALO_MATCH_TOL, f"gap={gap:.3e}"),
        "renewal_mass": (
            abs(renewal * (4.0 - p) - 1.0) <= RENEWAL_TOL,
            f"pi11*(4-p)={renewal * (4.0 - p):.15f}",
        ),
        "cycle_mean": (
            abs(report.cycle_mean - (4.0 - p)) <= report.ci_halfwidth_cycle,
            f"sim={report.cycle_mean:.6f} expected={4.0 - p:.6f} "
            f"+/- {report.ci_halfwidth_cycle:.2e}",
        ),
    }
    if p >= SERIES_MIN_P:
        series = alo_left_branch_series(p, rate)
        checks["left_branch_series"] = (
            abs(series - 3.0 * p * rate) <= SERIES_TOL,
            f"series={series:.12f} 3pR={3.0 * p * rate:.12f}",
        )
    return checks


class Command(HarqCommand):
    def short_desc(self):
        return "Check analytic optima against simulation; exit 2 on disagreement"

    def add_options(self, parser):
        parser.add_argument(
            "--snr-db",
            type=float,
            action="append",
            help=f"SNR points in dB (default: {', '.join(map(str, VERIFY_SNRS))})",
        )
        parser.add_argument(
            "--policies", help="comma-separated subset of policies (default: all)"
        )
        parser.add_argument(
            "--slots", type=int, default=self.settings.getint("SIM_SLOTS")
        )
        parser.add_argument(
            "--seed", type=int, default=self.settings.getint("SIM_SEED")
        )

    def run(self, args):
        snrs = args.snr_db or VERIFY_SNRS
        selected = POLICIES
        if args.policies:
            selected = [name.strip() for name in args.policies.split(",")]
        failures = []
        for snr_db in snrs:
            points = {}
            for config in verify_configs:
                if config["policy"] not in selected:
                    continue
                spec = SystemSpec(
                    users=config["users"],
                    attempts=config.get("attempts", 1),
                    pbar=pbar_from_db(snr_db),
                )
                policy = create_policy(
                    config["policy"], spec, config.get("levels", 1), self.settings
                )
                point = policy.optimize()
                report = simulate(
                    spec, point.params, args.slots, args.seed, self.settings
                )
                agreement = compare(point, report, spec.pbar)
                points[policy.name] = (point, report)
                print(
                    f"{agreement.verdict:8s} {policy.name:18s} snr={snr_db:g} dB "
                    f"analytic={point.throughput:.6f} "
                    f"sim={report.throughput_est:.6f}"
                    f"+/-{agreement.throughput_band:.2e} "
                    f"power={report.power_est:.6f}/{spec.pbar:.6f}"
                )
                if not agreement.agree:
                    failures.append(f"{policy.name} at {snr_db:g} dB")

            if CDTDMA_ALO in points and CDTDMA_ONOFF in points:
                alo_point, alo_report = points[CDTDMA_ALO]
                checks = alo_identities(alo_point, points[CDTDMA_ONOFF][0], alo_report)
                for name, (ok, detail) in checks.items():
                    verdict = "AGREE" if ok else "DISAGREE"
                    print(f"{verdict:8s} {name:18s} snr={snr_db:g} dB {detail}")
                    if not ok:
                        failures.append(f"{name} at {snr_db:g} dB")

        if failures:
            raise VerificationError(
                f"{len(failures)} check(s) disagree: {', '.join(failures)}"
            )
        print(f"All checks agree over {len(snrs)} SNR point(s)")
        return 0
