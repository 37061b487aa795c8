"""
Base class for harq-mac subcommands.

Each module in this package defines one HarqCommand subclass; the CLI
discovers them and names the subcommand after the module.
"""

import logging
import math

from harq_mac.special import db_to_linear


class HarqCommand:
    def __init__(self, settings):
        self.settings = settings

    @property
    def logger(self):
        return logging.getLogger(f"harq_mac.commands.{type(self).__name__}")

    def syntax(self):
        return "[options]"

    def short_desc(self):
        return ""

    def add_options(self, parser):
        pass

    def run(self, args):
        """Run the command and return the process exit code."""
        raise NotImplementedError


def add_system_options(parser, snr=True):
    parser.add_argument("-K", "--users", type=int, default=2, help="number of users")
    if snr:
        parser.add_argument(
            "--snr-db",
            type=float,
            required=True,
            help="average SNR in dB; P = 10^(snr/10) per user",
        )


def format_value(value):
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.10g}"
    return str(value)


def pbar_from_db(snr_db):
    return db_to_linear(snr_db)
