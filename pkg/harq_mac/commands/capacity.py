from harq_mac.capacity import ewfc_capacity
from harq_mac.commands import HarqCommand, add_system_options, pbar_from_db
from harq_mac.constants import CONVENTIONS


class Command(HarqCommand):
    def short_desc(self):
        return "Ergodic water-filling capacity of the symmetric MAC"

    def add_options(self, parser):
        add_system_options(parser)
        parser.add_argument(
            "--convention",
            choices=CONVENTIONS,
            default=self.settings.get("CAPACITY_CONVENTION"),
            help="power formula used to solve for the water level",
        )

    def run(self, args):
        pbar = pbar_from_db(args.snr_db)
        solution = ewfc_capacity(
            args.users,
            pbar,
            args.convention,
            bracket=tuple(self.settings.get("CAPACITY_BRACKET")),
            rtol=self.settings.getfloat("CAPACITY_RTOL"),
        )
        print(f"users:         {solution.users}")
        print(f"snr_db:        {args.snr_db:g}")
        print(f"pbar:          {pbar:.10g}")
        print(f"convention:    {solution.convention}")
        print(f"water_level:   {solution.water_level:.10g}")
        print(f"total_power:   {solution.total_power:.10g}")
        print(f"capacity_nats: {solution.capacity:.10g}")
        print(f"capacity_bits: {solution.capacity_bits:.10g}")
        return 0
