"""TSCH MAC state: clocks, shared-slot CSMA backoff, EB/KA beaconing, association."""

from __future__ import annotations

import enum
import random
from collections import deque
from dataclasses import dataclass, field

from .core import BROADCAST, Frame, FrameKind

PPB = 1_000_000_000
MIN_BE = 1
MAX_BE = 7
DEFAULT_GUARD_US = 1_000
DEFAULT_EB_PERIOD_US = 4_000_000
DEFAULT_KA_PERIOD_US = 10_000_000
EB_JITTER = 0.1


class MacMode(str, enum.Enum):
    BASELINE = "BASELINE_6TISCH_MINIMAL"
    SIXPP = "SIXPP"

    @classmethod
    def parse(cls, text: str) -> "MacMode":
        key = text.strip().upper()
        aliases = {"BASELINE": cls.BASELINE, "6TISCH": cls.BASELINE,
                   "BASELINE_6TISCH_MINIMAL": cls.BASELINE,
                   "SIXPP": cls.SIXPP, "6PP": cls.SIXPP}
        if key not in aliases:
            raise ValueError(f"unknown mode {text!r}; use baseline or sixpp")
        return aliases[key]

    @property
    def short(self) -> str:
        return "baseline" if self is MacMode.BASELINE else "sixpp"


def _div_round(num: int, den: int) -> int:
    """Integer division rounding half away from zero."""
    q, r = divmod(abs(num), den)
    if 2 * r >= den:
        q += 1
    return q if num >= 0 else -q


@dataclass
class ClockModel:
    """Drifting local clock, tracked against the node's time source.

    ``local_time(t) = t * (1 + drift) + offset``; drift is kept in parts per
    billion so the error arithmetic stays in integers.
    """
    drift_ppb: int = 0
    offset: int = 0
    anchor: int = 0           # true time of the last resync
    anchor_error: int = 0     # residual error right after that resync

    def local_time(self, t_true: int) -> int:
        return t_true + _div_round(t_true * self.drift_ppb, PPB) + self.offset

    def sync_error(self, now: int, ref_drift_ppb: int = 0) -> int:
        """Slot-boundary estimate minus the reference boundary, in us."""
        return self.anchor_error + _div_round((self.drift_ppb - ref_drift_ppb) * (now - self.anchor), PPB)

    def desync_time(self, guard: int, ref_drift_ppb: int = 0) -> int | None:
        """True time at which ``|sync_error|`` first reaches ``guard``."""
        rel = abs(self.drift_ppb - ref_drift_ppb)
        if rel == 0:
            return None
        room = guard - abs(self.anchor_error)
        if room <= 0:
            return self.anchor
        return self.anchor + -(-room * PPB // rel)


def resync(clock: ClockModel, now: int, ref_drift_ppb: int = 0, residual: int = 0) -> int:
    """Realign the clock to its reference at ``now``; returns the error just before."""
    before = clock.sync_error(now, ref_drift_ppb)
    clock.offset -= before - residual
    clock.anchor = now
    clock.anchor_error = residual
    return before


@dataclass
class TschNodeState:
    node: int
    associated: bool = False
    asn_estimate: int | None = None
    last_sync_at: int = 0
    time_source: int | None = None
    eb_period: int = DEFAULT_EB_PERIOD_US
    ka_period: int = DEFAULT_KA_PERIOD_US
    tx_queue: deque = field(default_factory=deque)
    backoff_exponent: int = MIN_BE
    backoff: int = 0
    retries: int = 0
    joined_at: int | None = None
    eb_index: int = 0
    eb_epoch: int = 0
    ka_pending: bool = False

    @property
    def has_pending(self) -> bool:
        return bool(self.tx_queue)


def shared_slot_contention(states: dict[int, TschNodeState]) -> dict[int, str]:
    """TX for queued nodes whose backoff expired, DEFER (and count down) otherwise."""
    decision = {}
    for node in sorted(states):
        st = states[node]
        if not st.tx_queue:
            continue
        if st.backoff == 0:
            decision[node] = "TX"
        else:
            st.backoff -= 1
            decision[node] = "DEFER"
    return decision


def on_tx_done(state: TschNodeState, success: bool, rng: random.Random,
               max_retries: int) -> Frame | None:
    """Update queue and CSMA state after a transmission.

    Broadcasts are always reported as ``success``. Returns the head frame when
    it leaves the queue (delivered or dropped), else ``None``.
    """
    if success:
        state.backoff_exponent = MIN_BE
        state.backoff = 0
        state.retries = 0
        return state.tx_queue.popleft()
    state.backoff = rng.randint(0, 2 ** state.backoff_exponent - 1)
    state.backoff_exponent = min(state.backoff_exponent + 1, MAX_BE)
    state.retries += 1
    if state.retries > max_retries:
        state.retries = 0
        return state.tx_queue.popleft()
    return None


def next_eb_time(state: TschNodeState, start: int, rng: random.Random) -> int:
    """Time of the next EB: ``start + k*period`` with +-10% jitter per period."""
    k = state.eb_index
    state.eb_index += 1
    jitter = int(round(rng.uniform(-EB_JITTER, EB_JITTER) * state.eb_period))
    return max(start, start + k * state.eb_period + jitter)


def baseline_eb_tick(state: TschNodeState, now: int, asn: int, rank: int | None,
                     seq: int, is_coordinator: bool = False,
                     mode: MacMode = MacMode.BASELINE) -> Frame | None:
    if mode is not MacMode.BASELINE:
        return None
    if not (state.associated or is_coordinator) or rank is None:
        return None
    return Frame(FrameKind.EB, state.node, BROADCAST, seq, 32, now,
                 {"asn": asn, "rank": rank})


def try_associate(state: TschNodeState, frame: Frame, now: int) -> bool:
    """Join on an EB. Returns True only on the first association of this episode."""
    if frame.kind is not FrameKind.EB or "asn" not in frame.meta:
        return False
    if state.associated:
        return False
    state.associated = True
    state.asn_estimate = frame.meta["asn"]
    state.last_sync_at = now
    if state.joined_at is None:
        state.joined_at = now
    return True


def keepalive_tick(state: TschNodeState, now: int, seq: int,
                   mode: MacMode = MacMode.BASELINE) -> Frame | None:
    if mode is not MacMode.BASELINE:
        return None
    if not state.associated or state.time_source is None or state.ka_pending:
        return None
    if now - state.last_sync_at < state.ka_period:
        return None
    state.ka_pending = True
    return Frame(FrameKind.KA, state.node, state.time_source, seq, 16, now)


def disassociate(state: TschNodeState) -> list[Frame]:
    """Drop association; returns frames flushed from the queue."""
    flushed = list(state.tx_queue)
    state.tx_queue.clear()
    state.associated = False
    state.asn_estimate = None
    state.time_source = None
    state.backoff = 0
    state.backoff_exponent = MIN_BE
    state.retries = 0
    state.ka_pending = False
    state.eb_epoch += 1
    return flushed
