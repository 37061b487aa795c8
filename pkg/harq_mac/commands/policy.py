from harq_mac.commands import HarqCommand, add_system_options, pbar_from_db
from harq_mac.constants import POLICIES
from harq_mac.items import SystemSpec
from harq_mac.registry import create_policy
from harq_mac.simulator import compare, simulate


class Command(HarqCommand):
    def syntax(self):
        return "<policy> [options]"

    def short_desc(self):
        return "Optimize one policy at one SNR, optionally checking by simulation"

    def add_options(self, parser):
        parser.add_argument("policy", choices=POLICIES)
        add_system_options(parser)
        parser.add_argument(
            "-M", "--attempts", type=int, default=1, help="attempts per packet"
        )
        parser.add_argument(
            "-L", "--levels", type=int, default=1, help="power levels in the feedback"
        )
        parser.add_argument(
            "-F",
            "--feedback",
            type=int,
            default=None,
            help="feedback alphabet size, checked against the policy",
        )
        parser.add_argument(
            "--simulate", action="store_true", help="verify by Monte Carlo"
        )
        parser.add_argument(
            "--slots", type=int, default=self.settings.getint("SIM_SLOTS")
        )
        parser.add_argument(
            "--seed", type=int, default=self.settings.getint("SIM_SEED")
        )

    def run(self, args):
        spec = SystemSpec(
            users=args.users,
            attempts=args.attempts,
            pbar=pbar_from_db(args.snr_db),
            feedback=args.feedback,
        )
        policy = create_policy(args.policy, spec, args.levels, self.settings)
        point = policy.optimize()

        print(f"policy:          {policy.name}")
        print(
            f"K M F L:         {spec.users} {spec.attempts} "
            f"{policy.feedback_size()} {args.levels}"
        )
        print(f"snr_db:          {args.snr_db:g}")
        print(f"pbar:            {spec.pbar:.10g}")
        print(f"throughput_nats: {point.throughput:.10g}")
        print(f"throughput_bits: {point.throughput_bits:.10g}")
        print(f"normalized:      {point.normalized:.10g}")
        print(f"params:          {point.params.as_text()}")
        for name, value in point.details.items():
            print(f"  {name}: {value}")
        if not args.simulate:
            return 0

        report = simulate(spec, point.params, args.slots, args.seed, self.settings)
        agreement = compare(point, report, spec.pbar)
        print(
            f"sim_throughput:  {report.throughput_est:.10g} "
            f"+/- {report.ci_halfwidth_throughput:.3g}"
        )
        print(
            f"sim_power:       {report.power_est:.10g} "
            f"+/- {report.ci_halfwidth_power:.3g} (budget {spec.pbar:.10g})"
        )
        print(
            f"renewals:        {report.renewals} "
            f"(mean cycle {report.cycle_mean:.6g})"
        )
        print(f"feedback:        {list(report.feedback_histogram)}")
        print(f"verdict:         {agreement.verdict}")
        return 0 if agreement.agree else 2
