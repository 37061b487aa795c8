"""
SNR sweep over several policies, written as CSV.

The ``[sweep]`` section of the config file sets the grid and the defaults;
``[policy:<name>]`` sections override users, attempts or levels for one
policy. Command-line flags override both.
"""

import csv
import logging
import math
from dataclasses import dataclass, field, fields
from multiprocessing import Pool
from pathlib import Path

from harq_mac import __version__
from harq_mac.commands import HarqCommand, format_value
from harq_mac.constants import CONVENTIONS, POLICIES, STANDARD
from harq_mac.exceptions import ArgumentError, ConfigurationError
from harq_mac.items import SystemSpec
from harq_mac.mixins import ANY_ATTEMPTS
from harq_mac.registry import create_policy, get_policy_class
from harq_mac.settings import read_config
from harq_mac.simulator import MIN_SIM_SLOTS, simulate
from harq_mac.special import db_to_linear, derive_seed

HEADER = [
    "snr_db",
    "pbar",
    "policy",
    "K",
    "M",
    "F",
    "throughput_nats",
    "throughput_bits",
    "normalized",
    "params",
    "sim_throughput",
    "sim_ci",
]


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepEntry:
    policy: str
    users: int
    attempts: int
    levels: int


@dataclass(frozen=True)
class SweepConfig:
    snr_from: float = -10.0
    snr_to: float = 20.0
    snr_step: float = 5.0
    policies: tuple = tuple(POLICIES)
    users: int = 2
    attempts: int = 2
    levels: int = 3
    slots: int = 0
    seed: int = 2011
    convention: str = STANDARD
    output: str = "sweep.csv"
    # 0 takes SWEEP_WORKERS from the settings
    workers: int = 0
    policy_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.snr_from > self.snr_to:
            raise ArgumentError(
                f"snr_from {self.snr_from} is above snr_to {self.snr_to}"
            )
        if not self.snr_step > 0:
            raise ArgumentError(f"snr_step must be > 0, got {self.snr_step}")
        if self.slots and self.slots < MIN_SIM_SLOTS:
            raise ArgumentError(
                f"slots must be 0 (no simulation) or >= {MIN_SIM_SLOTS}, "
                f"got {self.slots}"
            )
        if self.convention not in CONVENTIONS:
            raise ArgumentError(f"Unknown convention {self.convention!r}")
        unknown = [name for name in self.policies if name not in POLICIES]
        if unknown:
            raise ConfigurationError(f"Unknown policies in sweep: {unknown}")

    @classmethod
    def from_file(cls, path=None, **overrides):
        """Read ``[sweep]`` and ``[policy:<name>]`` sections, then apply overrides."""
        parser = read_config(path)
        values = {}
        if parser.has_section("sweep"):
            section = parser["sweep"]
            for item in fields(cls):
                if item.name not in section or item.name == "policy_options":
                    continue
                raw = section[item.name]
                if item.name == "policies":
                    values["policies"] = tuple(
                        name.strip() for name in raw.split(",") if name.strip()
                    )
                elif item.type is str:
                    values[item.name] = raw
                elif item.type is int:
                    values[item.name] = section.getint(item.name)
                else:
                    values[item.name] = section.getfloat(item.name)
        options = {}
        for section_name in parser.sections():
            if section_name.startswith("policy:"):
                section = parser[section_name]
                options[section_name.split(":", 1)[1].strip()] = {
                    key: section.getint(key)
                    for key in ("users", "attempts", "levels")
                    if key in section
                }
        values["policy_options"] = options
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @property
    def snr_grid(self):
        count = int(math.floor((self.snr_to - self.snr_from) / self.snr_step + 1e-9))
        return [round(self.snr_from + i * self.snr_step, 10) for i in range(count + 1)]

    def entries(self, settings):
        entries = []
        for name in self.policies:
            cls = get_policy_class(name, settings)
            options = self.policy_options.get(name, {})
            entry = SweepEntry(
                policy=name,
                users=options.get("users", self.users),
                attempts=options.get(
                    "attempts", self.attempts if cls.attempts == ANY_ATTEMPTS else 1
                ),
                levels=options.get("levels", self.levels if cls.uses_levels else 1),
            )
            entries.append(entry)
        return entries


def point_seed(seed, *key):
    """Stable integer seed of one sweep point."""
    return derive_seed(seed, *key)


def evaluate_point(task):
    """One CSV row; runs in a worker process."""
    entry, snr_db, slots, seed, settings = task
    spec = SystemSpec(
        users=entry.users, attempts=entry.attempts, pbar=db_to_linear(snr_db)
    )
    policy = create_policy(entry.policy, spec, entry.levels, settings, seed=seed)
    point = policy.optimize()
    row = {
        "snr_db": snr_db,
        "pbar": spec.pbar,
        "policy": entry.policy,
        "K": entry.users,
        "M": entry.attempts,
        "F": policy.feedback_size(),
        "throughput_nats": point.throughput,
        "throughput_bits": point.throughput_bits,
        "normalized": point.normalized,
        "params": point.params.as_text(),
        "sim_throughput": "",
        "sim_ci": "",
    }
    if slots:
        report = simulate(spec, point.params, slots, seed, settings)
        row["sim_throughput"] = report.throughput_est
        row["sim_ci"] = report.ci_halfwidth_throughput
    return row


def run_sweep(config, settings):
    """Evaluate every (policy, snr) point; rows sorted by (policy, snr_db)."""
    settings = settings.copy_with(CAPACITY_CONVENTION=config.convention)
    tasks = []
    for index, entry in enumerate(config.entries(settings)):
        cls = get_policy_class(entry.policy, settings)
        if cls.analytic_users and entry.users not in cls.analytic_users:
            cls_users = ", ".join(str(k) for k in cls.analytic_users)
            logger.warning(
                f"Skipping {entry.policy}: closed form needs K in ({cls_users}), "
                f"sweep has K={entry.users}"
            )
            continue
        if cls.analytic_attempts and entry.attempts not in cls.analytic_attempts:
            logger.warning(
                f"Skipping {entry.policy}: closed form needs M in "
                f"{cls.analytic_attempts}, sweep has M={entry.attempts}"
            )
            continue
        for snr_index, snr_db in enumerate(config.snr_grid):
            seed = point_seed(config.seed, index, snr_index)
            tasks.append((entry, snr_db, config.slots, seed, settings))

    workers = config.workers or settings.getint("SWEEP_WORKERS", 1)
    if workers > 1 and len(tasks) > 1:
        with Pool(min(workers, len(tasks))) as pool:
            rows = pool.map(evaluate_point, tasks)
    else:
        rows = [evaluate_point(task) for task in tasks]
    return sorted(rows, key=lambda row: (row["policy"], row["snr_db"]))


def write_csv(rows, config, path, settings):
    with open(path, "w", newline="") as handle:
        handle.write(f"# version={__version__}\n")
        handle.write(f"# seed={config.seed}\n")
        handle.write(f"# convention={config.convention}\n")
        handle.write(f"# users={config.users}\n")
        handle.write(f"# slots={config.slots}\n")
        handle.write(f"# settings={settings.module_name}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(HEADER)
        for row in rows:
            writer.writerow([format_value(row[column]) for column in HEADER])


class Command(HarqCommand):
    def short_desc(self):
        return "Sweep policies over an SNR grid and write CSV"

    def add_options(self, parser):
        parser.add_argument("--snr-from", type=float, dest="snr_from")
        parser.add_argument("--snr-to", type=float, dest="snr_to")
        parser.add_argument("--snr-step", type=float, dest="snr_step")
        parser.add_argument(
            "--policies", help="comma-separated policy names (default: all)"
        )
        parser.add_argument("-K", "--users", type=int)
        parser.add_argument("-M", "--attempts", type=int)
        parser.add_argument("-L", "--levels", type=int)
        parser.add_argument(
            "--slots", type=int, help="simulate every point (0 disables)"
        )
        parser.add_argument("--seed", type=int)
        parser.add_argument("--convention", choices=CONVENTIONS)
        parser.add_argument("-o", "--output")
        parser.add_argument("--workers", type=int)

    def run(self, args):
        policies = None
        if args.policies:
            policies = tuple(name.strip() for name in args.policies.split(","))
        config = SweepConfig.from_file(
            args.config,
            snr_from=args.snr_from,
            snr_to=args.snr_to,
            snr_step=args.snr_step,
            policies=policies,
            users=args.users,
            attempts=args.attempts,
            levels=args.levels,
            slots=args.slots,
            seed=args.seed,
            convention=args.convention,
            output=args.output,
            workers=args.workers,
        )
        rows = run_sweep(config, self.settings)
        path = Path(config.output)
        write_csv(rows, config, path, self.settings)
        self.logger.info(f"Wrote {len(rows)} rows to {path}")
        return 0
