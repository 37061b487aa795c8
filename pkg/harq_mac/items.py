"""
Data items passed between the policies, the simulator and the commands.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

from harq_mac.exceptions import ArgumentError
from harq_mac.special import FadingModel


@dataclass(frozen=True)
class SystemSpec:
    """
    Symmetric K-user block-fading MAC.

    ``pbar`` is the per-user long-term power budget, which equals the average
    SNR because noise and fading have unit power. ``feedback`` may be left
    as None to take the size implied by the policy.
    """

    users: int = 2
    attempts: int = 1
    pbar: float = 1.0
    feedback: Optional[int] = None
    fading: FadingModel = field(default_factory=FadingModel)

    def __post_init__(self):
        if self.users < 1:
            raise ArgumentError(f"users must be >= 1, got {self.users}")
        if self.attempts < 1:
            raise ArgumentError(f"attempts must be >= 1, got {self.attempts}")
        if self.feedback is not None and self.feedback < 1:
            raise ArgumentError(f"feedback must be >= 1, got {self.feedback}")
        if not self.pbar >= 0:
            raise ArgumentError(f"pbar must be >= 0, got {self.pbar}")


@dataclass(frozen=True)
class InrLevels:
    """
    Incremental redundancy quantizer.

    ``powers[m]`` holds the L increasing power levels offered at attempt
    m + 1; ``windows[m]`` >= 1 widens the top bin at non-final attempts so
    that deep-but-not-hopeless fades still send the top level and
    accumulate information.
    """

    rate: float
    powers: tuple
    windows: tuple = ()

    def __post_init__(self):
        if self.rate < 0:
            raise ArgumentError(f"rate must be >= 0, got {self.rate}")
        for attempt, levels in enumerate(self.powers, start=1):
            if any(b <= a for a, b in zip(levels, levels[1:])) or min(levels) <= 0:
                raise ArgumentError(
                    f"Power levels of attempt {attempt} must be positive and "
                    f"strictly increasing, got {levels}"
                )
        if any(w < 1 for w in self.windows):
            raise ArgumentError(f"windows must be >= 1, got {self.windows}")

    @property
    def attempts(self):
        return len(self.powers)

    @property
    def levels(self):
        return len(self.powers[0]) if self.powers else 0

    def window(self, attempt):
        if attempt < len(self.windows):
            return self.windows[attempt]
        return 1.0


@dataclass(frozen=True)
class PolicyParams:
    """
    Policy identifier plus its free parameters.

    ``thresholds`` holds the gain threshold s, the increasing vector
    s_1 < ... < s_L for multilevel policies, or (s_single, s_joint) for the
    joint+TDMA split. ``rate`` is derived and stored for traceability.
    """

    policy: str
    thresholds: tuple = ()
    tau: Optional[float] = None
    alpha: Optional[float] = None
    levels: int = 1
    rate: float = 0.0
    inr: Optional[InrLevels] = None

    def __post_init__(self):
        if any(s < 0 for s in self.thresholds):
            raise ArgumentError(f"thresholds must be >= 0, got {self.thresholds}")
        for name in ("tau", "alpha"):
            share = getattr(self, name)
            if share is not None and not 0.0 <= share <= 1.0:
                raise ArgumentError(f"{name} must be in [0, 1], got {share}")
        if self.levels < 1:
            raise ArgumentError(f"levels must be >= 1, got {self.levels}")

    @property
    def threshold(self):
        return self.thresholds[0] if self.thresholds else None

    def as_fields(self):
        """name=value pairs for tabular output."""
        fields = {}
        if len(self.thresholds) == 1:
            fields["s"] = self.thresholds[0]
        else:
            for index, value in enumerate(self.thresholds, start=1):
                fields[f"s{index}"] = value
        if self.tau is not None:
            fields["tau"] = self.tau
        if self.alpha is not None:
            fields["alpha"] = self.alpha
        fields["L"] = self.levels
        fields["R"] = self.rate
        if self.inr is not None:
            for attempt, levels in enumerate(self.inr.powers, start=1):
                for level, power in enumerate(levels, start=1):
                    fields[f"P{attempt}_{level}"] = power
            for attempt, window in enumerate(self.inr.windows, start=1):
                fields[f"w{attempt}"] = window
        return fields

    def as_text(self):
        return ";".join(
            f"{name}={value:.10g}" if isinstance(value, float) else f"{name}={value}"
            for name, value in self.as_fields().items()
        )


@dataclass(frozen=True)
class SimReport:
    throughput_est: float
    power_est: float
    ci_halfwidth_throughput: float
    ci_halfwidth_power: float
    renewals: int
    slots: int
    feedback_histogram: tuple
    power_per_user: tuple = ()
    cycle_mean: float = math.nan
    ci_halfwidth_cycle: float = math.nan
    occupancy: dict = field(default_factory=dict)

    @property
    def throughput_bits(self):
        return self.throughput_est / math.log(2.0)

    def agrees(self, value, sigmas_scale=1.0):
        """True when ``value`` lies inside the (scaled) throughput band."""
        return abs(self.throughput_est - value) <= (
            sigmas_scale * self.ci_halfwidth_throughput
        )


@dataclass(frozen=True)
class ThroughputPoint:
    avg_power: float
    throughput: float
    params: PolicyParams
    normalized: float = math.nan
    report: Optional[SimReport] = None
    details: dict = field(default_factory=dict)

    @property
    def throughput_bits(self):
        return self.throughput / math.log(2.0)
