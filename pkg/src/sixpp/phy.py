"""PHY timing and per-slotframe CT message capacity.

All durations are integer microseconds. Airtime is plain bits over data rate;
preamble, access address, CRC and coded-PHY expansion are folded into the
CT overhead byte count.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from typing import Iterable


class PhyMode(enum.Enum):
    LE_2M = 2_000_000
    LE_1M = 1_000_000
    LE_CODED_500K = 500_000
    LE_CODED_125K = 125_000
    IEEE802154_250K = 250_000

    @property
    def data_rate(self) -> int:
        return self.value

    @classmethod
    def parse(cls, name: str) -> "PhyMode":
        try:
            return cls[name]
        except KeyError:
            valid = ", ".join(m.name for m in cls)
            raise ValueError(f"unknown PHY {name!r}; valid names: {valid}") from None


# Fastest first, 802.15.4 last.
ALL_PHYS = (PhyMode.LE_2M, PhyMode.LE_1M, PhyMode.LE_CODED_500K,
            PhyMode.LE_CODED_125K, PhyMode.IEEE802154_250K)

DEFAULT_RAMP_UP_US = 40
DEFAULT_OVERHEAD_BYTES = 6
DEFAULT_PAYLOAD_BYTES = 64
DEFAULT_SLOTFRAME_US = 10_000


@dataclass(frozen=True)
class CtTiming:
    phy: PhyMode = PhyMode.LE_2M
    ramp_up: int = DEFAULT_RAMP_UP_US
    overhead_bytes: int = DEFAULT_OVERHEAD_BYTES
    payload_bytes: int = DEFAULT_PAYLOAD_BYTES

    def __post_init__(self) -> None:
        if self.ramp_up < 0:
            raise ValueError("ramp_up must be >= 0")
        if self.overhead_bytes < 0:
            raise ValueError("overhead_bytes must be >= 0")
        if self.payload_bytes < 1:
            raise ValueError("payload_bytes must be >= 1")


def on_air_time(phy: PhyMode, total_bytes: int) -> int:
    """Airtime in microseconds, rounded up."""
    if total_bytes < 0:
        raise ValueError("total_bytes must be >= 0")
    return -(-(total_bytes * 8 * 1_000_000) // phy.data_rate)


def ct_micro_slot_duration(timing: CtTiming) -> int:
    return timing.ramp_up + on_air_time(timing.phy, timing.payload_bytes + timing.overhead_bytes)


def messages_per_slotframe(t_sf: int, timing: CtTiming, n_tx: int, n_h: int) -> int:
    """Distinct flooded messages that fit in one slotframe of ``t_sf`` us."""
    if n_tx < 1 or n_h < 1:
        raise ValueError("n_tx and n_h must be >= 1")
    if t_sf <= 0:
        raise ValueError("slotframe duration must be positive")
    return t_sf // (ct_micro_slot_duration(timing) * (n_tx + n_h))


@dataclass(frozen=True)
class CapacityRow:
    phy: PhyMode
    n_tx: int
    n_h: int
    payload_bytes: int
    t_slot_us: int
    messages: int


CAPACITY_HEADER = ("phy", "n_tx", "n_h", "payload_bytes", "t_slot_us", "messages")


def capacity_sweep(t_sf: int, payload_bytes: int, n_tx_range: Iterable[int],
                   n_h_range: Iterable[int], phys: Iterable[PhyMode] = ALL_PHYS,
                   ramp_up: int = DEFAULT_RAMP_UP_US,
                   overhead_bytes: int = DEFAULT_OVERHEAD_BYTES) -> list[CapacityRow]:
    n_tx_values = list(n_tx_range)
    n_h_values = list(n_h_range)
    phys = list(phys)
    if not n_tx_values or not n_h_values or not phys:
        raise ValueError("sweep ranges must be non-empty")
    rows = []
    for phy in phys:
        timing = CtTiming(phy, ramp_up, overhead_bytes, payload_bytes)
        t_slot = ct_micro_slot_duration(timing)
        for n_tx in n_tx_values:
            for n_h in n_h_values:
                rows.append(CapacityRow(phy, n_tx, n_h, payload_bytes, t_slot,
                                        messages_per_slotframe(t_sf, timing, n_tx, n_h)))
    return rows


def capacity_csv(rows: Iterable[CapacityRow], comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CAPACITY_HEADER)
    for r in rows:
        writer.writerow((r.phy.name, r.n_tx, r.n_h, r.payload_bytes, r.t_slot_us, r.messages))
    return buf.getvalue()
