"""Slotframe layout with a CT head region, ASN arithmetic and channel hopping."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .phy import CtTiming, ct_micro_slot_duration, messages_per_slotframe

DEFAULT_SLOT_US = 10_000
DEFAULT_SIXPP_SLOTS = 101
DEFAULT_TSCH_CHANNELS = tuple(range(11, 27))
DEFAULT_CT_CHANNELS = (37, 38, 39)


class ScheduleError(ValueError):
    pass


class SlotRole(enum.Enum):
    CT = "CT"
    SHARED = "SHARED"
    IDLE = "IDLE"


@dataclass(frozen=True)
class CtWindow:
    n_tx: int
    n_h: int
    timing: CtTiming
    floods_per_frame: int = 1

    def __post_init__(self) -> None:
        if self.n_tx < 1 or self.n_h < 1:
            raise ScheduleError("n_tx and n_h must be >= 1")
        if self.floods_per_frame < 1:
            raise ScheduleError("floods_per_frame must be >= 1")

    @property
    def micro_slots_per_flood(self) -> int:
        return self.n_tx + self.n_h

    @property
    def micro_slot_us(self) -> int:
        return ct_micro_slot_duration(self.timing)

    @property
    def flood_us(self) -> int:
        return self.micro_slots_per_flood * self.micro_slot_us

    @property
    def delta_ct(self) -> int:
        return self.flood_us * self.floods_per_frame


@dataclass(frozen=True)
class SlotframeLayout:
    total_slots: int
    ct_reserved_slots: int
    shared_slots: int
    slot_duration: int = DEFAULT_SLOT_US
    # 6TiSCH-minimal style frames keep only this many shared slots and leave the rest idle.
    idle_slots: int = 0

    def __post_init__(self) -> None:
        if self.total_slots < 1:
            raise ScheduleError("total_slots must be >= 1")
        if self.ct_reserved_slots + self.shared_slots + self.idle_slots != self.total_slots:
            raise ScheduleError("slot counts do not add up to total_slots")

    @property
    def tau_sf(self) -> int:
        return self.total_slots * self.slot_duration

    def frame_start(self, asn: int) -> int:
        return asn - asn % self.total_slots


def build_layout(total_slots: int, ct_window: CtWindow | int | None,
                 slot_duration: int = DEFAULT_SLOT_US) -> SlotframeLayout:
    """CT region at the head of the frame, shared slots after it.

    ``ct_window`` may be a :class:`CtWindow` or a raw Delta_CT in microseconds;
    ``None`` or 0 gives a pure shared frame.
    """
    if total_slots < 1:
        raise ScheduleError("total_slots must be >= 1")
    if ct_window is None:
        delta = 0
    elif isinstance(ct_window, CtWindow):
        delta = ct_window.delta_ct
    else:
        delta = int(ct_window)
        if delta < 0:
            raise ScheduleError("Delta_CT must be >= 0")
    ct_slots = -(-delta // slot_duration)
    if ct_slots > total_slots:
        raise ScheduleError(
            f"CT window of {delta} us needs {ct_slots} slots, slotframe has {total_slots}")
    if isinstance(ct_window, CtWindow):
        bound = messages_per_slotframe(ct_slots * slot_duration, ct_window.timing,
                                       ct_window.n_tx, ct_window.n_h)
        if ct_window.floods_per_frame > bound:
            raise ScheduleError("more floods than fit in the reserved CT region")
    return SlotframeLayout(total_slots, ct_slots, total_slots - ct_slots, slot_duration)


def build_minimal_layout(total_slots: int, slot_duration: int = DEFAULT_SLOT_US) -> SlotframeLayout:
    """6TiSCH minimal: one shared slot at offset 0, the remainder idle."""
    if total_slots < 1:
        raise ScheduleError("total_slots must be >= 1")
    return SlotframeLayout(total_slots, 0, 1, slot_duration, idle_slots=total_slots - 1)


def slot_role(layout: SlotframeLayout, asn: int) -> SlotRole:
    offset = asn % layout.total_slots
    if offset < layout.ct_reserved_slots:
        return SlotRole.CT
    if offset < layout.ct_reserved_slots + layout.shared_slots:
        return SlotRole.SHARED
    return SlotRole.IDLE


def next_shared_asn(layout: SlotframeLayout, asn: int) -> int:
    """First shared slot at or after ``asn``."""
    if layout.shared_slots == 0:
        raise ScheduleError("layout has no shared slots")
    offset = asn % layout.total_slots
    lo = layout.ct_reserved_slots
    hi = lo + layout.shared_slots
    if offset < lo:
        return asn + (lo - offset)
    if offset < hi:
        return asn
    return asn + (layout.total_slots - offset) + lo


@dataclass(frozen=True)
class HoppingConfig:
    tsch_channels: tuple[int, ...] = DEFAULT_TSCH_CHANNELS
    ct_channels: tuple[int, ...] = DEFAULT_CT_CHANNELS
    tsch_offset: int = 0
    ct_offset: int = 0

    def __post_init__(self) -> None:
        for name in ("tsch_channels", "ct_channels"):
            chans = getattr(self, name)
            if not chans:
                raise ScheduleError(f"{name} must not be empty")
            if len(set(chans)) != len(chans):
                raise ScheduleError(f"{name} has duplicates")


def tsch_channel(cfg: HoppingConfig, asn: int) -> int:
    return cfg.tsch_channels[(asn + cfg.tsch_offset) % len(cfg.tsch_channels)]


def ct_channel(cfg: HoppingConfig, flood_index: int) -> int:
    return cfg.ct_channels[(flood_index + cfg.ct_offset) % len(cfg.ct_channels)]
