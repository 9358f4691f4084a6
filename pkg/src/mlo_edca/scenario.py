"""Configuration types for single- and multi-link EDCA scenarios.

All durations are microseconds, rates are bits per microsecond (== Mbit/s),
frame lengths are bits.  Delay bounds are milliseconds because that is how
QoS targets are usually quoted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple, Union


class ConfigError(ValueError):
    """Raised when a scenario violates one of its invariants."""

    def __init__(self, violations: Sequence["Violation"]):
        self.violations = list(violations)
        msg = "; ".join(str(v) for v in self.violations) or "invalid configuration"
        super().__init__(msg)


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


@dataclass(frozen=True)
class PhyProfile:
    slot_time: float = 20.0          # sigma
    discrete_step: float = 10.0      # delta, lattice unit of the delay GFs
    sifs: float = 10.0
    phy_header: float = 192.0
    data_rate: float = 11.0          # bits/us
    ctrl_rate: float = 1.0           # bits/us
    len_rts: float = 160.0
    len_cts: float = 112.0
    len_ack: float = 112.0
    len_mac_header: float = 224.0


# 802.11b-style PHY used throughout the evaluation (1 Mb/s control, 11 Mb/s data).
DSSS_PHY = PhyProfile()


@dataclass(frozen=True)
class AcEdcaConfig:
    cw_min: int
    cw_max: int
    aifsn: int
    txop: float                      # us, multiple of 32
    retry_limit: int
    n_stations: int
    payload: float                   # bits
    delay_bound: float = math.inf    # ms
    violation_threshold: float = 1.0
    name: str = ""

    @property
    def max_stage(self) -> int:
        """Maximum backoff stage m = log2(CW_max / CW_min)."""
        return int(round(math.log2(self.cw_max / self.cw_min)))

    def window(self, stage: int) -> int:
        """Contention window size at backoff stage ``stage``."""
        return self.cw_min * 2 ** min(stage, self.max_stage)


@dataclass(frozen=True)
class LinkScenario:
    phy: PhyProfile
    acs: Tuple[AcEdcaConfig, ...]

    def __post_init__(self):
        object.__setattr__(self, "acs", tuple(self.acs))

    @property
    def num_acs(self) -> int:
        return len(self.acs)


@dataclass(frozen=True)
class MloScenario:
    phy: PhyProfile
    num_links: int
    all_acs: Tuple[AcEdcaConfig, ...]
    assignment: Tuple[int, ...] = field(default=())   # 1-based link per AC

    def __post_init__(self):
        object.__setattr__(self, "all_acs", tuple(self.all_acs))
        assignment = tuple(int(m) for m in self.assignment) or (1,) * len(self.all_acs)
        object.__setattr__(self, "assignment", assignment)


Scenario = Union[PhyProfile, AcEdcaConfig, LinkScenario, MloScenario]

TXOP_STEP_US = 32
TXOP_MAX_US = 8192
CW_LIMIT = 1024
AIFSN_RANGE = (2, 15)
RETRY_RANGE = (4, 7)


def aifs_of(ac: AcEdcaConfig, phy: PhyProfile) -> float:
    """AIFS duration in us: SIFS + AIFSN * slot."""
    return phy.sifs + ac.aifsn * phy.slot_time


def split_links(mlo: MloScenario) -> List[LinkScenario]:
    """Partition the ACs of ``mlo`` into one LinkScenario per link.

    Links without any AC come back as empty scenarios; analysis code skips them.
    """
    bad = [
        Violation(f"assignment[{i}]", f"link index {m} outside 1..{mlo.num_links}")
        for i, m in enumerate(mlo.assignment)
        if not 1 <= m <= mlo.num_links
    ]
    if len(mlo.assignment) != len(mlo.all_acs):
        bad.append(Violation("assignment", "length differs from number of ACs"))
    if bad:
        raise ConfigError(bad)
    links = []
    for m in range(1, mlo.num_links + 1):
        acs = tuple(ac for ac, mi in zip(mlo.all_acs, mlo.assignment) if mi == m)
        links.append(LinkScenario(mlo.phy, acs))
    return links


def link_members(mlo: MloScenario) -> List[List[int]]:
    """Indices into ``mlo.all_acs`` for each link, in link order."""
    return [
        [i for i, mi in enumerate(mlo.assignment) if mi == m]
        for m in range(1, mlo.num_links + 1)
    ]


def _is_pow2(v: float) -> bool:
    if v < 1 or v != int(v):
        return False
    v = int(v)
    return v & (v - 1) == 0


def _validate_phy(phy: PhyProfile, path: str) -> List[Violation]:
    out = []
    for name in PhyProfile.__dataclass_fields__:
        val = getattr(phy, name)
        if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
            out.append(Violation(f"{path}.{name}", "must be strictly positive"))
    if not out:
        ratio = phy.slot_time / phy.discrete_step
        if abs(ratio - round(ratio)) > 1e-9:
            out.append(Violation(f"{path}.discrete_step", "must divide slot_time evenly"))
    return out


def _validate_ac(ac: AcEdcaConfig, path: str, txop_grid: bool = True) -> List[Violation]:
    out = []

    def bad(fld, msg):
        out.append(Violation(f"{path}.{fld}", msg))

    # CW_min = 1 makes the f_0 - 1 term vanish and the transmit probability blow up.
    if not 2 <= ac.cw_min <= CW_LIMIT:
        bad("cw_min", f"must lie in 2..{CW_LIMIT}")
    if not ac.cw_min <= ac.cw_max <= CW_LIMIT:
        bad("cw_max", f"must lie in cw_min..{CW_LIMIT}")
    if ac.cw_min >= 1 and ac.cw_max >= 1 and not _is_pow2(ac.cw_max / ac.cw_min):
        bad("cw_max", "CW ratio not power of two")
    if not AIFSN_RANGE[0] <= ac.aifsn <= AIFSN_RANGE[1] or ac.aifsn != int(ac.aifsn):
        bad("aifsn", "must be an integer in 2..15")
    if not 0 <= ac.txop <= TXOP_MAX_US:
        bad("txop", f"must lie in 0..{TXOP_MAX_US} us")
    elif txop_grid and ac.txop % TXOP_STEP_US != 0:
        bad("txop", "TXOP not multiple of 32 us")
    if not RETRY_RANGE[0] <= ac.retry_limit <= RETRY_RANGE[1]:
        bad("retry_limit", "must lie in 4..7")
    if ac.n_stations < 1 or ac.n_stations != int(ac.n_stations):
        bad("n_stations", "must be a positive integer")
    if not ac.payload >= 0:
        bad("payload", "must be non-negative")
    if not ac.delay_bound > 0:
        bad("delay_bound", "must be positive")
    if not 0 < ac.violation_threshold <= 1:
        bad("violation_threshold", "must lie in (0, 1]")
    return out


def validate(obj: Scenario, path: str = "", txop_grid: bool = True) -> List[Violation]:
    """Return every violated invariant of ``obj``; an empty list means valid.

    ``txop_grid=False`` accepts TXOP limits off the 32 us grid (published
    sweeps use 4080 us, for instance).
    """
    if isinstance(obj, PhyProfile):
        return _validate_phy(obj, path or "phy")
    if isinstance(obj, AcEdcaConfig):
        return _validate_ac(obj, path or "ac", txop_grid)
    if isinstance(obj, LinkScenario):
        prefix = f"{path}." if path else ""
        out = _validate_phy(obj.phy, f"{prefix}phy")
        if not obj.acs:
            out.append(Violation(f"{prefix}acs", "link needs at least one AC"))
        for i, ac in enumerate(obj.acs):
            out += _validate_ac(ac, f"{prefix}acs[{i}]", txop_grid)
        return out
    if isinstance(obj, MloScenario):
        out = _validate_phy(obj.phy, "phy")
        if obj.num_links < 1:
            out.append(Violation("links", "must be at least 1"))
        if not obj.all_acs:
            out.append(Violation("acs", "need at least one AC"))
        for i, ac in enumerate(obj.all_acs):
            out += _validate_ac(ac, f"acs[{i}]", txop_grid)
        if len(obj.assignment) != len(obj.all_acs):
            out.append(Violation("assignment", "length differs from number of ACs"))
        for i, m in enumerate(obj.assignment):
            if not 1 <= m <= obj.num_links:
                out.append(Violation(f"assignment[{i}]", f"link index {m} outside 1..{obj.num_links}"))
        return out
    raise TypeError(f"cannot validate {type(obj).__name__}")


def check(obj: Scenario, txop_grid: bool = True) -> None:
    """Raise ConfigError listing every violation of ``obj``."""
    violations = validate(obj, txop_grid=txop_grid)
    if violations:
        raise ConfigError(violations)
