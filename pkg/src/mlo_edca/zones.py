"""AIFS zone structure of a single link.

After every busy period the ACs with the smallest AIFS start counting backoff
first; the others join once their longer AIFS has elapsed.  The post-AIFS_1
timeline is therefore cut into zones, each with a fixed set of eligible ACs.

Indices stored here are 1-based where they name a zone (``first_zone`` and
``slot_zone`` hold values in 1..J) so they read the same as the model's
zone numbers; array positions themselves are ordinary 0-based Python.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .scenario import LinkScenario, aifs_of


@dataclass(frozen=True)
class ZoneModel:
    sorted_acs: Tuple[int, ...]       # sorted position -> index into link.acs
    offsets: Tuple[int, ...]          # h_k in slots, per sorted AC
    zone_offsets: Tuple[int, ...]     # distinct offsets, one per zone
    eligible_count: Tuple[int, ...]   # Z_j per zone
    first_zone: Tuple[int, ...]       # Z_k^0 per sorted AC (1-based)
    slot_zone: Tuple[int, ...]        # phi_j for slots j = 1..h_I (1-based zone)

    @property
    def num_zones(self) -> int:
        return len(self.zone_offsets)

    @property
    def num_acs(self) -> int:
        return len(self.sorted_acs)

    def zone_widths(self) -> np.ndarray:
        """Number of slots in each zone; the last zone is unbounded (0 here)."""
        h = np.asarray(self.zone_offsets)
        return np.append(np.diff(h), 0)

    def zone_of_slot(self, j: int) -> int:
        """Zone (1-based) of the j-th slot after AIFS_1 has elapsed."""
        return int(np.searchsorted(self.zone_offsets, j - 1, side="right"))


def build_zones(link: LinkScenario) -> ZoneModel:
    if not link.acs:
        raise ValueError("zone model needs at least one AC")
    phy = link.phy
    aifs = [aifs_of(ac, phy) for ac in link.acs]
    # stable sort so equal-AIFS ACs keep their input order
    order = tuple(sorted(range(len(aifs)), key=lambda i: aifs[i]))
    base = aifs[order[0]]
    offsets = []
    for i in order:
        steps = (aifs[i] - base) / phy.slot_time
        assert abs(steps - round(steps)) < 1e-9, "AIFS difference not a slot multiple"
        offsets.append(int(round(steps)))

    zone_offsets = tuple(sorted(set(offsets)))
    h = np.asarray(offsets)
    eligible = tuple(int(np.sum(h <= d)) for d in zone_offsets)
    first_zone = tuple(zone_offsets.index(o) + 1 for o in offsets)
    # Slot j belongs to the last zone whose offset is <= j - 1: an AC with
    # offset h first contends in slot h + 1.
    slot_zone = tuple(
        int(np.searchsorted(zone_offsets, j - 1, side="right"))
        for j in range(1, offsets[-1] + 1)
    )
    return ZoneModel(
        sorted_acs=order,
        offsets=tuple(offsets),
        zone_offsets=zone_offsets,
        eligible_count=eligible,
        first_zone=first_zone,
        slot_zone=slot_zone,
    )
