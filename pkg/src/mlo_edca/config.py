"""JSON scenario files.

Durations are in microseconds except delay bounds (milliseconds); the unit is
part of each key name.  Example::

    {
      "phy": {"slot_us": 20, "step_us": 10},
      "links": 2,
      "assignment": [1, 2],
      "acs": [
        {"name": "voice", "cw_min": 32, "cw_max": 1024, "aifsn": 8,
         "txop_us": 4080, "retry_limit": 7, "n_stations": 4,
         "payload_bytes": 1000, "dmax_ms": 100, "epsilon": 0.01}
      ]
    }

``"txop_grid": false`` accepts TXOP values off the 32 us grid.  Optional
sections ``ga``, ``sweep`` and ``validate`` hold settings for the
corresponding CLI subcommands and are returned untouched.
"""
from __future__ import annotations

import copy
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

from .scenario import (AcEdcaConfig, ConfigError, MloScenario, PhyProfile,
                       Violation, check)

PHY_KEYS = {
    "slot_us": "slot_time",
    "step_us": "discrete_step",
    "sifs_us": "sifs",
    "phy_header_us": "phy_header",
    "data_rate_mbps": "data_rate",
    "ctrl_rate_mbps": "ctrl_rate",
    "rts_bits": "len_rts",
    "cts_bits": "len_cts",
    "ack_bits": "len_ack",
    "mac_header_bits": "len_mac_header",
}

AC_REQUIRED = ("cw_min", "cw_max", "aifsn", "txop_us", "retry_limit",
               "n_stations", "payload_bytes")
AC_OPTIONAL = ("name", "dmax_ms", "epsilon")
TOP_KEYS = ("phy", "links", "assignment", "acs", "txop_grid", "ga", "sweep", "validate")


def _coerce(value: str) -> Any:
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value


def apply_overrides(raw: dict, overrides: Sequence[str]) -> dict:
    """Apply ``key=value`` overrides; keys are dotted paths and list
    positions are 1-based (``acs.2.aifsn=12``)."""
    out = copy.deepcopy(raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError([Violation(item, "override must look like key=value")])
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = out
        try:
            for part in parts[:-1]:
                node = node[int(part) - 1] if isinstance(node, list) else node.setdefault(part, {})
            last = parts[-1]
            if isinstance(node, list):
                node[int(last) - 1] = _coerce(value)
            else:
                node[last] = _coerce(value)
        except (ValueError, IndexError, TypeError, AttributeError):
            raise ConfigError([Violation(key, "override path does not exist")]) from None
    return out


def _number(d: dict, key: str, path: str, bad: List[Violation]):
    v = d.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        bad.append(Violation(f"{path}.{key}", "must be a number"))
        return math.nan
    return v


def parse_scenario(raw: dict) -> MloScenario:
    """Build and validate an MloScenario; every problem is reported at once."""
    bad: List[Violation] = []
    if not isinstance(raw, dict):
        raise ConfigError([Violation("", "top level must be an object")])
    for key in raw:
        if key not in TOP_KEYS:
            bad.append(Violation(key, "unknown key"))

    phy_raw = raw.get("phy", {})
    phy_kw = {}
    for key in phy_raw:
        if key not in PHY_KEYS:
            bad.append(Violation(f"phy.{key}", "unknown key"))
        else:
            phy_kw[PHY_KEYS[key]] = _number(phy_raw, key, "phy", bad)
    phy = PhyProfile(**phy_kw)

    acs = []
    acs_raw = raw.get("acs")
    if not isinstance(acs_raw, list) or not acs_raw:
        bad.append(Violation("acs", "must be a non-empty list"))
        acs_raw = []
    for i, a in enumerate(acs_raw):
        path = f"acs[{i}]"
        if not isinstance(a, dict):
            bad.append(Violation(path, "must be an object"))
            continue
        for key in a:
            if key not in AC_REQUIRED + AC_OPTIONAL:
                bad.append(Violation(f"{path}.{key}", "unknown key"))
        missing = [k for k in AC_REQUIRED if k not in a]
        for k in missing:
            bad.append(Violation(f"{path}.{k}", "missing"))
        if missing:
            continue
        v = {k: _number(a, k, path, bad) for k in AC_REQUIRED}
        acs.append(AcEdcaConfig(
            cw_min=v["cw_min"], cw_max=v["cw_max"], aifsn=v["aifsn"], txop=float(v["txop_us"]),
            retry_limit=v["retry_limit"], n_stations=v["n_stations"],
            payload=8.0 * v["payload_bytes"],
            delay_bound=float(a.get("dmax_ms", math.inf)),
            violation_threshold=float(a.get("epsilon", 1.0)),
            name=str(a.get("name", f"AC{i + 1}")),
        ))

    links = raw.get("links", 1)
    if not isinstance(links, int) or isinstance(links, bool):
        bad.append(Violation("links", "must be an integer"))
        links = 1
    assignment = raw.get("assignment", [])
    if not isinstance(assignment, list) or not all(isinstance(m, int) for m in assignment):
        bad.append(Violation("assignment", "must be a list of link numbers"))
        assignment = []
    if bad:
        raise ConfigError(bad)
    txop_grid = raw.get("txop_grid", True)
    if not isinstance(txop_grid, bool):
        raise ConfigError([Violation("txop_grid", "must be true or false")])
    mlo = MloScenario(phy, links, tuple(acs), tuple(assignment))
    check(mlo, txop_grid=txop_grid)
    return mlo


def load_config(path, overrides: Sequence[str] = ()) -> Tuple[MloScenario, dict]:
    """(scenario, raw dict after overrides)."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([Violation(str(path), f"cannot read config: {exc}")]) from None
    raw = apply_overrides(raw, overrides)
    return parse_scenario(raw), raw


def scenario_to_dict(mlo: MloScenario) -> Dict[str, Any]:
    inverse = {v: k for k, v in PHY_KEYS.items()}
    return {
        "phy": {inverse[f]: getattr(mlo.phy, f) for f in inverse},
        "links": mlo.num_links,
        "assignment": list(mlo.assignment),
        "acs": [
            {
                "name": ac.name,
                "cw_min": ac.cw_min,
                "cw_max": ac.cw_max,
                "aifsn": ac.aifsn,
                "txop_us": ac.txop,
                "retry_limit": ac.retry_limit,
                "n_stations": ac.n_stations,
                "payload_bytes": ac.payload / 8,
                **({"dmax_ms": ac.delay_bound} if math.isfinite(ac.delay_bound) else {}),
                "epsilon": ac.violation_threshold,
            }
            for ac in mlo.all_acs
        ],
    }
