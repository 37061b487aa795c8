"""
harq-mac command-line entry point.

Subcommands are the modules of ``harq_mac.commands``. Exit codes: 0 on
success, 1 on usage or configuration errors, 2 on numerical or verification
failures.
"""

import argparse
import logging
import sys

from harq_mac import __version__
from harq_mac.exceptions import ArgumentError, HarqMacError
from harq_mac.registry import walk_modules
from harq_mac.settings import get_settings, read_config

logger = logging.getLogger("harq_mac")


class HarqArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ArgumentError(message)


def iter_commands(settings):
    for module in walk_modules("harq_mac.commands"):
        cls = getattr(module, "Command", None)
        if cls is not None:
            yield module.__name__.rsplit(".", 1)[-1], cls(settings)


def global_options(parser, default=None):
    """Options accepted before or after the subcommand."""
    parser.add_argument(
        "--config", default=default, help="path to harq.cfg (default: closest one)"
    )
    parser.add_argument(
        "--settings",
        default=default,
        help="settings module, e.g. harq_mac.settings.quick",
    )
    parser.add_argument("--log-level", default=default, help="override LOG_LEVEL")


def resolve_settings(argv):
    """Settings named by --settings, then --config, then the usual lookup."""
    pre = HarqArgumentParser(add_help=False, allow_abbrev=False)
    global_options(pre)
    known, _ = pre.parse_known_args(argv)
    module = known.settings
    if module is None and known.config:
        module = read_config(known.config).get("settings", "default", fallback=None)
    return get_settings(module), known


def build_parser(settings):
    parser = HarqArgumentParser(prog="harq-mac")
    parser.add_argument("--version", action="version", version=__version__)
    global_options(parser)
    subparsers = parser.add_subparsers(dest="command", metavar="<command>")
    subparsers.required = True
    commands = {}
    for name, command in iter_commands(settings):
        sub = subparsers.add_parser(
            name,
            help=command.short_desc(),
            usage=f"harq-mac {name} {command.syntax()}",
        )
        global_options(sub, default=argparse.SUPPRESS)
        command.add_options(sub)
        commands[name] = command
    return parser, commands


def configure_logging(settings, level=None):
    logging.basicConfig(
        level=(level or settings.get("LOG_LEVEL", "INFO")).upper(),
        format=settings.get("LOG_FORMAT"),
        stream=sys.stderr,
    )


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        settings, known = resolve_settings(argv)
        configure_logging(settings, known.log_level)
        parser, commands = build_parser(settings)
        args = parser.parse_args(argv)
        return commands[args.command].run(args)
    except HarqMacError as error:
        logger.error(str(error))
        return error.exit_code
    except OSError as error:
        logger.error(f"I/O error: {error}")
        return 1
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
