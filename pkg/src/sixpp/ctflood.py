"""Time-triggered concurrent-transmission flood (Glossy-style).

A flood occupies ``n_tx + n_h`` back-to-back micro-slots. The initiator sends
in micro-slots ``0 .. n_tx-1``; any other node that first decodes the frame in
micro-slot ``k`` retransmits it in ``k+1 .. k+n_tx`` and is then silent.
Every transmission in micro-slot ``m`` carries ``relay_cnt = m``, so a receiver
can reconstruct the flood start as ``rx_start - relay_cnt * T_slot`` no matter
which retransmission it caught. A frame is never sent with ``relay_cnt > n_h``
(the hop budget), and nothing happens past the window end.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .core import Frame, Topology
from .phy import CtTiming, ct_micro_slot_duration


class FloodError(ValueError):
    pass


@dataclass(frozen=True)
class CtFloodConfig:
    n_tx: int = 2
    n_h: int = 3
    timing: CtTiming = CtTiming()
    initiator: int = 0

    def __post_init__(self) -> None:
        if self.n_tx < 1 or self.n_h < 1:
            raise FloodError("n_tx and n_h must be >= 1")

    @property
    def window(self) -> int:
        return self.n_tx + self.n_h

    @property
    def micro_slot_us(self) -> int:
        return ct_micro_slot_duration(self.timing)


@dataclass
class CtNodeFloodState:
    received: bool = False
    relay_cnt_at_rx: int = 0
    first_rx_micro_slot: int | None = None
    tx_remaining: int = 0
    frame: Frame | None = None


@dataclass(frozen=True)
class FloodAction:
    """``TX`` with the relay counter stamped on the frame, or ``RX``."""
    kind: str
    relay_cnt: int = 0
    frame: Frame | None = None


RX = FloodAction("RX")


@dataclass(frozen=True)
class SyncReference:
    ct0: int
    relay_cnt: int


@dataclass(frozen=True)
class FloodResult:
    reached: bool
    first_rx_micro_slot: int | None
    relay_cnt: int | None
    sync: SyncReference | None
    rx_time: int | None


def initial_states(cfg: CtFloodConfig, node_count: int,
                   frame: Frame | None = None) -> list[CtNodeFloodState]:
    states = [CtNodeFloodState() for _ in range(node_count)]
    init = states[cfg.initiator]
    init.received = True
    init.relay_cnt_at_rx = 0
    init.first_rx_micro_slot = -1  # eligible from micro-slot 0
    init.tx_remaining = cfg.n_tx
    init.frame = frame
    return states


def flood_step(cfg: CtFloodConfig, states: Sequence[CtNodeFloodState],
               micro_slot: int) -> list[FloodAction]:
    """Decide TX/RX for every node in ``micro_slot`` and consume TX budget."""
    if not 0 <= micro_slot < cfg.window:
        raise FloodError(f"micro-slot {micro_slot} outside window of {cfg.window}")
    actions = []
    for st in states:
        if (st.received and st.tx_remaining > 0
                and micro_slot > st.first_rx_micro_slot
                and micro_slot <= cfg.n_h):
            st.tx_remaining -= 1
            actions.append(FloodAction("TX", micro_slot, st.frame))
        else:
            if st.received and micro_slot > cfg.n_h:
                st.tx_remaining = 0
            actions.append(RX)
    return actions


def deliver(cfg: CtFloodConfig, state: CtNodeFloodState, micro_slot: int,
            relay_cnt: int, frame: Frame | None) -> None:
    if state.received:
        return
    state.received = True
    state.relay_cnt_at_rx = relay_cnt
    state.first_rx_micro_slot = micro_slot
    state.tx_remaining = cfg.n_tx
    state.frame = frame


def on_ct_rx(rx_start: int, relay_cnt: int, timing: CtTiming,
             n_h: int | None = None) -> SyncReference:
    """Flood origin time as seen from a reception that started at ``rx_start``."""
    if n_h is not None and relay_cnt > n_h:
        raise FloodError(f"relay_cnt {relay_cnt} exceeds hop budget {n_h}")
    back = relay_cnt * ct_micro_slot_duration(timing)
    if back > rx_start:
        raise FloodError("reception time too early for its relay counter")
    return SyncReference(rx_start - back, relay_cnt)


# receive(receiver, transmitters, micro_slot) -> decoded?
ReceiveFn = Callable[[int, list[int], int], bool]


def lossless_receive(topology: Topology) -> ReceiveFn:
    def receive(node: int, transmitters: list[int], micro_slot: int) -> bool:
        return bool(transmitters)
    return receive


def flood_outcome(cfg: CtFloodConfig, topology: Topology, receive: ReceiveFn,
                  frame: Frame | None = None, flood_start: int = 0,
                  participants: Sequence[bool] | None = None) -> list[FloodResult]:
    """Run one flood to completion.

    ``receive`` supplies the reception draws; it is called once per
    (not-yet-reached node, micro-slot) that has at least one transmitting
    in-neighbour, in ascending node order. ``participants`` masks nodes that
    are switched off for this flood.
    """
    n = topology.node_count
    states = initial_states(cfg, n, frame)
    t_slot = cfg.micro_slot_us
    for m in range(cfg.window):
        actions = flood_step(cfg, states, m)
        tx = {i: a for i, a in enumerate(actions) if a.kind == "TX"}
        if not tx:
            if all(s.tx_remaining == 0 for s in states if s.received):
                break
            continue
        heard: list[tuple[int, int, Frame | None]] = []
        for node in range(n):
            st = states[node]
            if st.received or (participants is not None and not participants[node]):
                continue
            senders = [s for s in topology.in_neighbors(node) if s in tx]
            if not senders:
                continue
            frames = {id(tx[s].frame) for s in senders}
            if len(frames) > 1 and len({_frame_key(tx[s].frame) for s in senders}) > 1:
                raise FloodError("concurrent transmitters carry divergent payloads")
            if receive(node, senders, m):
                heard.append((node, tx[senders[0]].relay_cnt, tx[senders[0]].frame))
        for node, relay_cnt, fr in heard:
            deliver(cfg, states[node], m, relay_cnt, fr)
    results = []
    for node, st in enumerate(states):
        if node == cfg.initiator:
            results.append(FloodResult(True, None, 0, SyncReference(flood_start, 0), None))
        elif st.received:
            rx_start = flood_start + st.first_rx_micro_slot * t_slot
            sync = on_ct_rx(rx_start, st.relay_cnt_at_rx, cfg.timing)
            results.append(FloodResult(True, st.first_rx_micro_slot, st.relay_cnt_at_rx,
                                       sync, rx_start + t_slot))
        else:
            results.append(FloodResult(False, None, None, None, None))
    return results


def _frame_key(frame: Frame | None):
    if frame is None:
        return None
    return (frame.kind, frame.src, frame.seq, frame.payload_bytes, repr(frame.meta))
